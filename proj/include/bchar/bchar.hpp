#ifndef BCHAR_BCHAR_HPP
#define BCHAR_BCHAR_HPP

#include "balls.hpp"
#include "cases.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "mass_optimizer.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "scheme.hpp"
#include "volume_matrix.hpp"

#endif
