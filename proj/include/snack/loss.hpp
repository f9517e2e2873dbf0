/// @file  loss.hpp
/// @brief Costs and gradients of the stochastic-neighbor and triplet objectives.
///
/// The neighbor term is the KL divergence between the affinities P and the
/// Student-t similarities Q of the embedding. The triplet term is the negative
/// log-likelihood of the heavy-tailed triplet model, so both terms and their
/// convex combination are minimized.

#pragma once

#include <snack/affinity.hpp>
#include <snack/core.hpp>
#include <snack/parallel.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace snack::loss {

struct CostGrad {
	double cost = 0.0;
	Matrix grad;
};

/// Student-t similarities of an embedding.
struct StudentT {
	/// Normalized similarities, zero diagonal, summing to 1.
	Matrix q;
	/// The (1 + |y_i - y_j|^2)^-1 terms, zero diagonal.
	Matrix unnorm;
};

namespace detail {

inline double sqDist(const Matrix& y, std::size_t a, std::size_t b) {
	const auto dims = y.cols();
	const double* ya = y.data() + static_cast<Eigen::Index>(a) * dims;
	const double* yb = y.data() + static_cast<Eigen::Index>(b) * dims;
	double s = 0.0;
	for (Eigen::Index c = 0; c < dims; ++c) {
		const double diff = ya[c] - yb[c];
		s += diff * diff;
	}
	return s;
}

/// Sum of (1+d^2)^-1 over all ordered pairs, reduced row by row in index order.
inline double studentNormalizer(const Matrix& y, std::size_t threads) {
	const auto n = static_cast<std::size_t>(y.rows());
	std::vector<double> rowSums(n, 0.0);
	snack::detail::parallelFor(n, threads, [&](std::size_t i) {
		double s = 0.0;
		for (std::size_t j = 0; j < n; ++j) {
			if (j != i)
				s += 1.0 / (1.0 + sqDist(y, i, j));
		}
		rowSums[i] = s;
	});
	return std::accumulate(rowSums.begin(), rowSums.end(), 0.0);
}

/// KL cost against @p p and gradient against @p gradScale * p.
///
/// The cost always uses the unscaled affinities so that it stays comparable
/// while the gradient uses exaggerated ones.
inline CostGrad tsneTerms(const Matrix& p, const Matrix& y, double gradScale, std::size_t threads) {
	const auto n = static_cast<std::size_t>(y.rows());
	const auto dims = y.cols();
	if (static_cast<std::size_t>(p.rows()) != n)
		throw InvalidArgument("affinity matrix size " + std::to_string(p.rows()) +
			" does not match embedding size " + std::to_string(n));
	const double z = studentNormalizer(y, threads);
	CostGrad out;
	out.grad = Matrix::Zero(y.rows(), dims);
	std::vector<double> rowCost(n, 0.0);
	snack::detail::parallelFor(n, threads, [&](std::size_t i) {
		const double* yi = y.data() + static_cast<Eigen::Index>(i) * dims;
		double* gi = out.grad.data() + static_cast<Eigen::Index>(i) * dims;
		double cost = 0.0;
		for (std::size_t j = 0; j < n; ++j) {
			if (j == i)
				continue;
			const double w = 1.0 / (1.0 + sqDist(y, i, j));
			const double q = w / z;
			const double pij = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
			if (pij > 0.0) {
				cost += pij * std::log(std::max(pij, affinity::kProbabilityFloor) /
					std::max(q, affinity::kProbabilityFloor));
			}
			const double coeff = 4.0 * (gradScale * pij - q) * w;
			const double* yj = y.data() + static_cast<Eigen::Index>(j) * dims;
			for (Eigen::Index c = 0; c < dims; ++c)
				gi[c] += coeff * (yi[c] - yj[c]);
		}
		rowCost[i] = cost;
	});
	out.cost = std::accumulate(rowCost.begin(), rowCost.end(), 0.0);
	return out;
}

/// log of the unnormalized heavy-tailed weight (1 + d^2/alpha)^(-(1+alpha)/2).
inline double logTailWeight(double sq, double alpha) {
	return -0.5 * (1.0 + alpha) * std::log1p(sq / alpha);
}

} // namespace detail

inline StudentT studentTQ(const Matrix& y) {
	const auto n = y.rows();
	if (n < 2)
		throw InvalidArgument("Student-t similarities need at least two points");
	StudentT out;
	out.unnorm = Matrix::Zero(n, n);
	for (Eigen::Index i = 0; i < n; ++i) {
		for (Eigen::Index j = 0; j < n; ++j) {
			if (i != j)
				out.unnorm(i, j) = 1.0 / (1.0 + detail::sqDist(y, static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
		}
	}
	out.q = out.unnorm / out.unnorm.sum();
	return out;
}

inline StudentT studentTQ(const Embedding& y) {
	return studentTQ(y.coords());
}

/// KL(P || Q) and its gradient with respect to the coordinates.
inline CostGrad tsneCostGrad(const affinity::AffinityMatrix& p, const Matrix& y, std::size_t threads = 1) {
	if (p.size() != static_cast<std::size_t>(y.rows()))
		throw InvalidArgument("affinity matrix and embedding disagree on N");
	return detail::tsneTerms(p.p(), y, 1.0, threads);
}

inline CostGrad tsneCostGrad(const affinity::AffinityMatrix& p, const Embedding& y, std::size_t threads = 1) {
	return tsneCostGrad(p, y.coords(), threads);
}

/// Probability that the heavy-tailed triplet model deems @p t satisfied.
inline double tsteProb(const Matrix& y, const Triplet& t, double alpha) {
	const double lij = detail::logTailWeight(detail::sqDist(y, t.i, t.j), alpha);
	const double lik = detail::logTailWeight(detail::sqDist(y, t.i, t.k), alpha);
	return 1.0 / (1.0 + std::exp(lik - lij));
}

inline double tsteProb(const Embedding& y, const Triplet& t, double alpha) {
	return tsteProb(y.coords(), t, alpha);
}

/// Crowd-kernel satisfaction probability (mu + d_ik^2) / (2 mu + d_ij^2 + d_ik^2).
inline double cklProb(const Matrix& y, const Triplet& t, double mu) {
	const double dij = detail::sqDist(y, t.i, t.j);
	const double dik = detail::sqDist(y, t.i, t.k);
	return (mu + dik) / (2.0 * mu + dij + dik);
}

inline double cklProb(const Embedding& y, const Triplet& t, double mu) {
	return cklProb(y.coords(), t, mu);
}

/// Negative log-likelihood of the triplets and its gradient.
///
/// Accumulation follows triplet order, so the result is deterministic.
inline CostGrad tsteCostGrad(const TripletSet& triplets, const Matrix& y, double alpha) {
	if (!(alpha > 0.0))
		throw InvalidArgument("alpha must be positive");
	checkTriplets(triplets, static_cast<std::size_t>(y.rows()));
	const auto dims = y.cols();
	CostGrad out;
	out.grad = Matrix::Zero(y.rows(), dims);
	for (const auto& t : triplets) {
		const double dij = detail::sqDist(y, t.i, t.j);
		const double dik = detail::sqDist(y, t.i, t.k);
		const double diff = detail::logTailWeight(dik, alpha) - detail::logTailWeight(dij, alpha);
		// -log p = log(1 + exp(diff)), evaluated without overflow.
		out.cost += diff > 0.0 ? diff + std::log1p(std::exp(-diff)) : std::log1p(std::exp(diff));
		const double miss = 1.0 / (1.0 + std::exp(-diff)); // 1 - p
		// d(-log p)/d(d_ij^2) and d(-log p)/d(d_ik^2).
		const double cij = miss * (1.0 + alpha) / (2.0 * (alpha + dij));
		const double cik = -miss * (1.0 + alpha) / (2.0 * (alpha + dik));
		const double* yi = y.data() + static_cast<Eigen::Index>(t.i) * dims;
		const double* yj = y.data() + static_cast<Eigen::Index>(t.j) * dims;
		const double* yk = y.data() + static_cast<Eigen::Index>(t.k) * dims;
		double* gi = out.grad.data() + static_cast<Eigen::Index>(t.i) * dims;
		double* gj = out.grad.data() + static_cast<Eigen::Index>(t.j) * dims;
		double* gk = out.grad.data() + static_cast<Eigen::Index>(t.k) * dims;
		for (Eigen::Index c = 0; c < dims; ++c) {
			const double aij = 2.0 * cij * (yi[c] - yj[c]);
			const double aik = 2.0 * cik * (yi[c] - yk[c]);
			gi[c] += aij + aik;
			gj[c] -= aij;
			gk[c] -= aik;
		}
	}
	return out;
}

inline CostGrad tsteCostGrad(const TripletSet& triplets, const Embedding& y, double alpha) {
	return tsteCostGrad(triplets, y.coords(), alpha);
}

/// lambda * triplet term + (1 - lambda) * neighbor term.
inline CostGrad snackCostGrad(const affinity::AffinityMatrix& p, const TripletSet& triplets, const Matrix& y,
	double lambda, double alpha, std::size_t threads = 1) {
	if (!(lambda >= 0.0 && lambda <= 1.0))
		throw InvalidArgument("lambda must lie in [0,1]");
	auto ste = tsteCostGrad(triplets, y, alpha);
	auto sne = tsneCostGrad(p, y, threads);
	CostGrad out;
	out.cost = lambda * ste.cost + (1.0 - lambda) * sne.cost;
	out.grad = lambda * ste.grad + (1.0 - lambda) * sne.grad;
	return out;
}

inline CostGrad snackCostGrad(const affinity::AffinityMatrix& p, const TripletSet& triplets, const Embedding& y,
	double lambda, double alpha, std::size_t threads = 1) {
	return snackCostGrad(p, triplets, y.coords(), lambda, alpha, threads);
}

} // namespace snack::loss
