#pragma once

#include "qtraj/analytics.hpp"
#include "qtraj/engine.hpp"
#include "qtraj/ensemble.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/fock.hpp"
#include "qtraj/params.hpp"
#include "qtraj/propagators.hpp"
#include "qtraj/quadrature.hpp"
#include "qtraj/rng.hpp"
#include "qtraj/squeezed.hpp"
