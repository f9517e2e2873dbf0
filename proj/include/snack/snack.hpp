/// @file  snack.hpp
/// @brief Umbrella header for the embedding library (without the HTTP layer).

#pragma once

#include <snack/affinity.hpp>
#include <snack/assignment.hpp>
#include <snack/core.hpp>
#include <snack/eval.hpp>
#include <snack/io.hpp>
#include <snack/kernels.hpp>
#include <snack/loss.hpp>
#include <snack/optimize.hpp>
#include <snack/triplets.hpp>
