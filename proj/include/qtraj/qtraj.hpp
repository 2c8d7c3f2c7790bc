#pragma once

#include "acceptance.hpp"
#include "basis.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "io.hpp"
#include "microstate.hpp"
#include "potential.hpp"
#include "quadrature.hpp"
#include "quantization.hpp"
#include "reduced_action.hpp"
#include "schrodinger.hpp"
#include "schwarzian.hpp"
#include "spherical.hpp"
#include "units.hpp"
