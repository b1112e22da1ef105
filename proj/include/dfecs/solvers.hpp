#pragma once

#include "dfecs/solvers/dictionary.hpp"
#include "dfecs/solvers/lasso_path.hpp"
#include "dfecs/solvers/nmf.hpp"
#include "dfecs/solvers/positive_lasso.hpp"
#include "dfecs/solvers/solver_config.hpp"
