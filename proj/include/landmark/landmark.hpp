#pragma once

// Dynamic prediction of survival from longitudinally measured biomarkers:
// landmark Cox models driven by predictable time-dependent covariates, with
// working Gaussian-process and reverse-time ("revival") longitudinal models,
// direct Bayes prediction, and cross-validated evaluation.

#include "landmark/covariance.hpp"
#include "landmark/cox.hpp"
#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/evaluate.hpp"
#include "landmark/longitudinal.hpp"
#include "landmark/optim.hpp"
#include "landmark/pipeline.hpp"
#include "landmark/revival.hpp"
#include "landmark/rng.hpp"
#include "landmark/serialize.hpp"
#include "landmark/simulate.hpp"
#include "landmark/survival.hpp"
