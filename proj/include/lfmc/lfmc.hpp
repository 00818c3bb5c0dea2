#pragma once

// Convenience header pulling in the whole library.

#include "lfmc/benchmarks.hpp"
#include "lfmc/config.hpp"
#include "lfmc/errors.hpp"
#include "lfmc/external_model.hpp"
#include "lfmc/gp_regression.hpp"
#include "lfmc/input_distribution.hpp"
#include "lfmc/model_probability.hpp"
#include "lfmc/report.hpp"
#include "lfmc/rng.hpp"
#include "lfmc/stats.hpp"
#include "lfmc/subset_simulation.hpp"
#include "lfmc/surrogate.hpp"
