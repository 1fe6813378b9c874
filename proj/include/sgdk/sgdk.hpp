#pragma once
/// Umbrella header for the whole library.

#include "sgdk/linalg.hpp"
#include "sgdk/thresholds.hpp"
#include "sgdk/random.hpp"
#include "sgdk/mixture.hpp"
#include "sgdk/quadratic.hpp"
#include "sgdk/sgd.hpp"
#include "sgdk/mechanism.hpp"
#include "sgdk/problems/qc.hpp"
#include "sgdk/problems/st.hpp"
#include "sgdk/experiments/models.hpp"
#include "sgdk/experiments/classify.hpp"
#include "sgdk/experiments/plan.hpp"
#include "sgdk/experiments/summary.hpp"
#include "sgdk/experiments/runner.hpp"
#include "sgdk/experiments/tables.hpp"
