#pragma once

#define GSMC_VERSION "0.1.0"

#include "gsmc/error.hpp"
#include "gsmc/normal.hpp"
#include "gsmc/random.hpp"
#include "gsmc/surv_model.hpp"
#include "gsmc/stoch_predict.hpp"
#include "gsmc/exact_predict.hpp"
#include "gsmc/wlrt_engine.hpp"
#include "gsmc/mvn_quad.hpp"
#include "gsmc/corr_assembly.hpp"
#include "gsmc/spending.hpp"
#include "gsmc/design_engine.hpp"
#include "gsmc/trial_sim.hpp"
#include "gsmc/config.hpp"
#include "gsmc/report.hpp"
