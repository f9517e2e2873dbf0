// Test-only oracles and synthetic fixtures. Nothing here calls into the code
// paths it is used to check.

#pragma once

#include <snack/core.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace snack::oracle {

inline std::vector<std::string> makeIds(std::size_t n, const std::string& prefix = "o") {
	std::vector<std::string> ids;
	for (std::size_t i = 0; i < n; ++i)
		ids.push_back(prefix + std::to_string(i));
	return ids;
}

inline Matrix randomMatrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
	std::normal_distribution<double> normal(0.0, scale);
	Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
	for (Eigen::Index i = 0; i < m.size(); ++i)
		m.data()[i] = normal(rng);
	return m;
}

/// Naive double loop over pairs.
inline Matrix naiveEuclidean(const Matrix& x) {
	Matrix d(x.rows(), x.rows());
	for (Eigen::Index i = 0; i < x.rows(); ++i) {
		for (Eigen::Index j = 0; j < x.rows(); ++j) {
			double s = 0.0;
			for (Eigen::Index c = 0; c < x.cols(); ++c)
				s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
			d(i, j) = std::sqrt(s);
		}
	}
	return d;
}

inline DistanceKernel randomKernel(std::size_t n, std::size_t dims, std::mt19937_64& rng) {
	return DistanceKernel(makeIds(n), naiveEuclidean(randomMatrix(n, dims, rng)));
}

inline TripletSet randomTriplets(std::size_t n, std::size_t m, std::mt19937_64& rng) {
	std::uniform_int_distribution<std::size_t> pick(0, n - 1);
	TripletSet out;
	while (out.size() < m) {
		Triplet t{pick(rng), pick(rng), pick(rng)};
		if (!t.degenerate())
			out.push_back(t);
	}
	return out;
}

/// Central finite-difference gradient of @p f at @p y.
inline Matrix finiteDifferenceGradient(const std::function<double(const Matrix&)>& f, const Matrix& y,
	double step = 1e-5) {
	Matrix grad(y.rows(), y.cols());
	Matrix probe = y;
	for (Eigen::Index i = 0; i < y.size(); ++i) {
		const double orig = probe.data()[i];
		probe.data()[i] = orig + step;
		const double up = f(probe);
		probe.data()[i] = orig - step;
		const double down = f(probe);
		probe.data()[i] = orig;
		grad.data()[i] = (up - down) / (2.0 * step);
	}
	return grad;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, tiny): error relative to the gradient scale.
inline double maxRelativeError(const Matrix& analytic, const Matrix& numeric) {
	const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
	return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Brute-force maximum over all injections of the shorter side into the longer.
inline double bruteForceMatching(const Matrix& w) {
	const bool rowsShort = w.rows() <= w.cols();
	const Matrix m = rowsShort ? w : Matrix(w.transpose());
	std::vector<Eigen::Index> cols(static_cast<std::size_t>(m.cols()));
	std::iota(cols.begin(), cols.end(), 0);
	double best = -std::numeric_limits<double>::infinity();
	// Enumerate permutations of all columns; the first rows() entries define an injection.
	do {
		double s = 0.0;
		for (Eigen::Index r = 0; r < m.rows(); ++r)
			s += m(r, cols[static_cast<std::size_t>(r)]);
		best = std::max(best, s);
	} while (std::next_permutation(cols.begin(), cols.end()));
	return best;
}

/// Brute-force count of label triplets among the first n.
inline std::size_t bruteForceLabelTriplets(const std::vector<int>& labels, std::size_t n) {
	std::size_t count = 0;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j)
			for (std::size_t k = 0; k < n; ++k)
				if (i != j && i != k && j != k && labels[i] == labels[j] && labels[i] != labels[k])
					++count;
	return count;
}

/// Gaussian blobs in @p dims dimensions; centers are spread `separation` apart
/// relative to a per-coordinate blob spread of 1. Objects are emitted in a
/// shuffled order so that any prefix mixes blobs.
struct Blobs {
	Matrix points;
	std::vector<int> blob;
};

inline Blobs makeBlobs(std::size_t blobs, std::size_t perBlob, std::size_t dims, double separation,
	std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> normal(0.0, 1.0);
	// Centers on scaled orthogonal axes (plus sign flips when blobs > dims)
	// keep every pair of centers at least `separation` apart.
	Matrix centers = Matrix::Zero(static_cast<Eigen::Index>(blobs), static_cast<Eigen::Index>(dims));
	for (std::size_t b = 0; b < blobs; ++b) {
		const auto axis = static_cast<Eigen::Index>(b % dims);
		const double sign = (b / dims) % 2 == 0 ? 1.0 : -1.0;
		centers(static_cast<Eigen::Index>(b), axis) = sign * separation / std::sqrt(2.0);
	}
	std::vector<std::size_t> order(blobs * perBlob);
	std::iota(order.begin(), order.end(), 0);
	std::shuffle(order.begin(), order.end(), rng);
	Blobs out;
	out.points.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(dims));
	out.blob.resize(order.size());
	for (std::size_t r = 0; r < order.size(); ++r) {
		const std::size_t b = order[r] / perBlob;
		out.blob[r] = static_cast<int>(b);
		for (std::size_t c = 0; c < dims; ++c)
			out.points(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
				centers(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) + normal(rng);
	}
	return out;
}

} // namespace snack::oracle
