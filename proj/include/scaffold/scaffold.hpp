#pragma once

#include "core.hpp"
#include "quadrature.hpp"
#include "surface_geometry.hpp"
#include "solid_harmonics.hpp"
#include "periodic_kernel.hpp"
#include "trace_space.hpp"
#include "bem_assembly.hpp"
#include "cell_solver.hpp"
#include "homogenization.hpp"
#include "deformation_basis.hpp"
#include "optimizer.hpp"
#include "geometry_io.hpp"
#include "cli_io.hpp"
