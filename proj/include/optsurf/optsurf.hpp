#pragma once

#include "optsurf/core.hpp"
#include "optsurf/cost.hpp"
#include "optsurf/displacement.hpp"
#include "optsurf/error.hpp"
#include "optsurf/graphbuild.hpp"
#include "optsurf/io.hpp"
#include "optsurf/maxflow.hpp"
#include "optsurf/metrics.hpp"
#include "optsurf/oracle.hpp"
#include "optsurf/phantom.hpp"
#include "optsurf/pipeline.hpp"
