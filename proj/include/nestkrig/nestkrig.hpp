#pragma once

#include "nestkrig/errors.hpp"
#include "nestkrig/linalg.hpp"
#include "nestkrig/kernels.hpp"
#include "nestkrig/random.hpp"
#include "nestkrig/parallel.hpp"
#include "nestkrig/data.hpp"
#include "nestkrig/gp_core.hpp"
#include "nestkrig/aggregation.hpp"
#include "nestkrig/nested_tree.hpp"
#include "nestkrig/baselines.hpp"
#include "nestkrig/predictors.hpp"
#include "nestkrig/estimation.hpp"
#include "nestkrig/metrics.hpp"
#include "nestkrig/config.hpp"
#include "nestkrig/bundle.hpp"
