#pragma once

#include "stflow/assembly.hpp"
#include "stflow/config.hpp"
#include "stflow/driver.hpp"
#include "stflow/error.hpp"
#include "stflow/estimators.hpp"
#include "stflow/export.hpp"
#include "stflow/field.hpp"
#include "stflow/fields.hpp"
#include "stflow/linear_solver.hpp"
#include "stflow/mesh.hpp"
#include "stflow/newton.hpp"
#include "stflow/physics.hpp"
#include "stflow/state.hpp"
#include "stflow/upscaling.hpp"
