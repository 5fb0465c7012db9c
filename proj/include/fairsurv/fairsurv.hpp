#pragma once

// Fairness-aware survival analysis: Cox proportional hazards with an
// individual-fairness regularizer, censoring-aware evaluation metrics, and
// the FNDCG@k fairness measure.

#include "fairsurv/common.hpp"
#include "fairsurv/config_file.hpp"
#include "fairsurv/cox.hpp"
#include "fairsurv/dataset.hpp"
#include "fairsurv/evaluation.hpp"
#include "fairsurv/fairness.hpp"
#include "fairsurv/model_io.hpp"
#include "fairsurv/training.hpp"
