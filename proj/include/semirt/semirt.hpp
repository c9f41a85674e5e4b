#pragma once

#include "semirt/adaptive_mh.hpp"
#include "semirt/archive.hpp"
#include "semirt/base_measure.hpp"
#include "semirt/conjugate.hpp"
#include "semirt/crp.hpp"
#include "semirt/diagnostics.hpp"
#include "semirt/identifiability.hpp"
#include "semirt/inference.hpp"
#include "semirt/math.hpp"
#include "semirt/model.hpp"
#include "semirt/pipeline.hpp"
#include "semirt/priors.hpp"
#include "semirt/rng.hpp"
#include "semirt/sampler.hpp"
#include "semirt/simulation.hpp"
#include "semirt/strategy.hpp"
