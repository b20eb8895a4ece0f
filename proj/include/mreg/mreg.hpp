#pragma once

#include "mreg/calculus.hpp"
#include "mreg/diagnostics.hpp"
#include "mreg/errors.hpp"
#include "mreg/evolve.hpp"
#include "mreg/forms.hpp"
#include "mreg/linalg.hpp"
#include "mreg/matrix_io.hpp"
#include "mreg/oracle.hpp"
#include "mreg/quadrature.hpp"
#include "mreg/quasilinear.hpp"
#include "mreg/spacetime.hpp"
#include "mreg/sqrtop.hpp"
#include "mreg/trajectory.hpp"
#include "mreg/triple.hpp"
#include "mreg/types.hpp"
