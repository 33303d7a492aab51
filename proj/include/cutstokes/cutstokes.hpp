#pragma once

#include "cutstokes/config.hpp"
#include "cutstokes/errors.hpp"
#include "cutstokes/forms.hpp"
#include "cutstokes/geometry.hpp"
#include "cutstokes/lagrange.hpp"
#include "cutstokes/manufactured.hpp"
#include "cutstokes/mesh.hpp"
#include "cutstokes/quadrature.hpp"
#include "cutstokes/solver.hpp"
#include "cutstokes/spaces.hpp"
#include "cutstokes/stepper.hpp"
#include "cutstokes/study.hpp"
#include "cutstokes/verify.hpp"
