#pragma once

#include "vec3.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "text_format.hpp"
#include "surface_complex.hpp"
#include "cone_model.hpp"
#include "weighted_geometry.hpp"
#include "conformal_models.hpp"
#include "solver.hpp"
#include "verification.hpp"
#include "io.hpp"
