#pragma once

#include "kmse/errors.hpp"
#include "kmse/linalg.hpp"
#include "kmse/dataset.hpp"
#include "kmse/kernels.hpp"
#include "kmse/filters.hpp"
#include "kmse/estimators.hpp"
#include "kmse/model_selection.hpp"
#include "kmse/rng.hpp"
#include "kmse/parallel.hpp"
#include "kmse/synthetic.hpp"
#include "kmse/analytic_risk.hpp"
#include "kmse/pipeline.hpp"
#include "kmse/risk.hpp"
#include "kmse/theory_checks.hpp"
#include "kmse/kmm_density.hpp"
