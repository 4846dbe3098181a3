#pragma once

#include "common.hpp"
#include "coverage.hpp"
#include "cpc.hpp"
#include "dataset.hpp"
#include "ensemble.hpp"
#include "explain/effects.hpp"
#include "explain/fanova.hpp"
#include "explain/lime.hpp"
#include "explain/surrogate.hpp"
#include "hungarian.hpp"
#include "models/cart.hpp"
#include "models/metrics.hpp"
#include "models/oracle.hpp"
#include "models/pipeline.hpp"
#include "models/primitives.hpp"
#include "pipeline_graph.hpp"
#include "run_history.hpp"
#include "search_space.hpp"
#include "service/cache.hpp"
#include "service/engine.hpp"
#include "service/export.hpp"
#include "simulate.hpp"
#include "structure_graph.hpp"
