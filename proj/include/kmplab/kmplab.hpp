#pragma once

#include "kmplab/common.hpp"
#include "kmplab/cost_functionals.hpp"
#include "kmplab/cutoff_moments.hpp"
#include "kmplab/experiments.hpp"
#include "kmplab/fields_pde.hpp"
#include "kmplab/grid_field.hpp"
#include "kmplab/kmp_engine.hpp"
#include "kmplab/metrics.hpp"
#include "kmplab/mollifier.hpp"
#include "kmplab/observables.hpp"
#include "kmplab/parallel.hpp"
#include "kmplab/path_constructions.hpp"
#include "kmplab/persistence.hpp"
#include "kmplab/quadrature.hpp"
#include "kmplab/rng.hpp"
#include "kmplab/spectral.hpp"
#include "kmplab/tilt_engine.hpp"
#include "kmplab/torus_lattice.hpp"
#include "kmplab/verify.hpp"
