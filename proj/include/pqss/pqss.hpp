#pragma once

// Umbrella header: the numerical library. The CLI layer (config.hpp, report.hpp, cli.hpp)
// additionally needs the vendored json.hpp and CLI11.hpp on the include path.

#include "pqss/error.hpp"
#include "pqss/mesh.hpp"
#include "pqss/quadrature.hpp"
#include "pqss/field.hpp"
#include "pqss/nonlinearity.hpp"
#include "pqss/problem.hpp"
#include "pqss/fem.hpp"
#include "pqss/solver.hpp"
#include "pqss/spectral.hpp"
#include "pqss/subsuper.hpp"
#include "pqss/iterate.hpp"
