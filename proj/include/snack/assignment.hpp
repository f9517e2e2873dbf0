/// @file  assignment.hpp
/// @brief Exact rectangular linear assignment (Hungarian method with potentials).

#pragma once

#include <snack/core.hpp>

#include <limits>
#include <vector>

namespace snack::assignment {

struct Matching {
	/// Column assigned to each row.
	std::vector<std::size_t> column;
	double total = 0.0;
};

/// Minimum-cost assignment of every row of @p cost to a distinct column.
/// Requires rows <= cols. O(rows^2 * cols).
inline Matching minCostAssignment(const Matrix& cost) {
	const auto rows = static_cast<std::size_t>(cost.rows());
	const auto cols = static_cast<std::size_t>(cost.cols());
	if (rows > cols)
		throw InvalidArgument("assignment needs rows <= cols");
	Matching out;
	if (rows == 0)
		return out;
	constexpr double inf = std::numeric_limits<double>::infinity();
	// 1-based arrays; slot 0 of `owner` is the row being inserted.
	std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
	std::vector<std::size_t> owner(cols + 1, 0), way(cols + 1, 0);
	for (std::size_t r = 1; r <= rows; ++r) {
		owner[0] = r;
		std::size_t col0 = 0;
		std::vector<double> minv(cols + 1, inf);
		std::vector<bool> used(cols + 1, false);
		do {
			used[col0] = true;
			const std::size_t r0 = owner[col0];
			double delta = inf;
			std::size_t col1 = 0;
			for (std::size_t c = 1; c <= cols; ++c) {
				if (used[c])
					continue;
				const double cur = cost(static_cast<Eigen::Index>(r0 - 1), static_cast<Eigen::Index>(c - 1)) - u[r0] - v[c];
				if (cur < minv[c]) {
					minv[c] = cur;
					way[c] = col0;
				}
				if (minv[c] < delta) {
					delta = minv[c];
					col1 = c;
				}
			}
			for (std::size_t c = 0; c <= cols; ++c) {
				if (used[c]) {
					u[owner[c]] += delta;
					v[c] -= delta;
				} else {
					minv[c] -= delta;
				}
			}
			col0 = col1;
		} while (owner[col0] != 0);
		do {
			const std::size_t col1 = way[col0];
			owner[col0] = owner[col1];
			col0 = col1;
		} while (col0 != 0);
	}
	out.column.assign(rows, 0);
	for (std::size_t c = 1; c <= cols; ++c) {
		if (owner[c] != 0)
			out.column[owner[c] - 1] = c - 1;
	}
	for (std::size_t r = 0; r < rows; ++r)
		out.total += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(out.column[r]));
	return out;
}

/// Maximum total weight of a one-to-one matching covering the shorter side.
inline double maxWeightMatching(const Matrix& weight) {
	if (weight.rows() <= weight.cols())
		return -minCostAssignment(-weight).total;
	return -minCostAssignment(-weight.transpose()).total;
}

} // namespace snack::assignment
