/// @file  affinity.hpp
/// @brief Gaussian neighbor affinities from a distance kernel.
///
/// Each row of the kernel gets its own bandwidth, chosen so that the
/// conditional neighbor distribution of that row has the requested
/// perplexity. The conditionals are then symmetrized into a joint
/// distribution over pairs.

#pragma once

#include <snack/core.hpp>
#include <snack/parallel.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace snack::affinity {

/// Probability floor applied inside the KL divergence.
inline constexpr double kProbabilityFloor = 1e-12;
/// Bandwidth search stops once |2^H - perplexity| falls below this.
inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr int kMaxBisections = 64;
inline constexpr double kSigmaMin = 1e-20;
inline constexpr double kSigmaMax = 1e20;

/// Result of calibrating one row's bandwidth.
struct SigmaFit {
	double sigma = 1.0;
	/// 2^H of the conditional at sigma.
	double perplexity = 0.0;
	/// False if the tolerance was not reached within the bisection cap.
	bool converged = false;
};

using SigmaVector = std::vector<double>;

namespace detail {

/// Writes the normalized conditional of one row into @p out (out[self] = 0)
/// and returns its entropy in bits. Distances are squared here.
inline double conditionalRow(std::span<const double> dist, std::size_t self, double sigma, std::span<double> out) {
	const std::size_t n = dist.size();
	double minSq = std::numeric_limits<double>::infinity();
	for (std::size_t j = 0; j < n; ++j) {
		if (j != self)
			minSq = std::min(minSq, dist[j] * dist[j]);
	}
	const double beta = 1.0 / (2.0 * sigma * sigma);
	double z = 0.0;
	double weighted = 0.0;
	for (std::size_t j = 0; j < n; ++j) {
		if (j == self) {
			out[j] = 0.0;
			continue;
		}
		const double shifted = (dist[j] * dist[j] - minSq) * beta;
		const double e = std::exp(-shifted);
		out[j] = e;
		z += e;
		if (e > 0.0)
			weighted += e * shifted;
	}
	if (!(z > 0.0) || !std::isfinite(z))
		throw Error("row " + std::to_string(self) + " collapsed");
	for (std::size_t j = 0; j < n; ++j)
		out[j] /= z;
	const double nats = std::log(z) + weighted / z;
	return nats / std::log(2.0);
}

} // namespace detail

/// Entropy in bits of the conditional neighbor distribution of one row.
inline double entropyBits(std::span<const double> dist, std::size_t self, double sigma) {
	std::vector<double> scratch(dist.size());
	return detail::conditionalRow(dist, self, sigma, scratch);
}

/// Bisects log(sigma) (relative to the row's largest distance) until the row's conditional reaches the target perplexity.
inline SigmaFit calibrateSigma(std::span<const double> dist, std::size_t self, double perplexity) {
	const std::size_t n = dist.size();
	if (self >= n)
		throw InvalidArgument("self index out of range");
	if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n)))
		throw InvalidArgument("perplexity " + std::to_string(perplexity) + " must lie in (1, N) with N = " +
			std::to_string(n));
	bool anyPositive = false;
	for (std::size_t j = 0; j < n; ++j)
		anyPositive = anyPositive || (j != self && dist[j] > 0.0);
	if (!anyPositive)
		throw InvalidArgument("degenerate row " + std::to_string(self) + ": all off-diagonal distances are zero");

	// The search runs on sigma / (largest distance in the row), so rescaling a
	// row rescales sigma and leaves the conditional unchanged.
	double scale = 0.0;
	for (std::size_t j = 0; j < n; ++j) {
		if (j != self)
			scale = std::max(scale, dist[j]);
	}
	std::vector<double> scratch(n);
	double lo = std::log(kSigmaMin);
	double hi = std::log(kSigmaMax);
	SigmaFit best;
	double bestErr = std::numeric_limits<double>::infinity();
	for (int it = 0; it < kMaxBisections; ++it) {
		const double logSigma = 0.5 * (lo + hi);
		const double sigma = scale * std::exp(logSigma);
		const double perp = std::exp2(detail::conditionalRow(dist, self, sigma, scratch));
		const double err = std::abs(perp - perplexity);
		if (err < bestErr) {
			bestErr = err;
			best = {sigma, perp, err < kPerplexityTolerance};
		}
		if (err < kPerplexityTolerance)
			break;
		if (perp > perplexity)
			hi = logSigma;
		else
			lo = logSigma;
	}
	return best;
}

/// Calibrates every row of @p k; rows are independent.
inline std::vector<SigmaFit> calibrateSigmas(const DistanceKernel& k, double perplexity, std::size_t threads = 1) {
	const std::size_t n = k.size();
	std::vector<SigmaFit> fits(n);
	const Matrix& d = k.dist();
	snack::detail::parallelFor(n, threads, [&](std::size_t i) {
		fits[i] = calibrateSigma(std::span<const double>(d.row(static_cast<Eigen::Index>(i)).data(), n), i, perplexity);
	});
	return fits;
}

/// Row-stochastic matrix of p_{j|i}; row i uses sigma[i].
inline Matrix conditionalP(const DistanceKernel& k, const SigmaVector& sigma, std::size_t threads = 1) {
	const std::size_t n = k.size();
	if (sigma.size() != n)
		throw InvalidArgument("sigma vector length does not match kernel size");
	for (double s : sigma) {
		if (!(s > 0.0) || !std::isfinite(s))
			throw InvalidArgument("sigma entries must be positive and finite");
	}
	if (n < 2)
		throw InvalidArgument("conditional affinities need at least two objects");
	Matrix cond(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
	const Matrix& d = k.dist();
	snack::detail::parallelFor(n, threads, [&](std::size_t i) {
		const auto r = static_cast<Eigen::Index>(i);
		detail::conditionalRow(std::span<const double>(d.row(r).data(), n), i, sigma[i],
			std::span<double>(cond.row(r).data(), n));
	});
	return cond;
}

/// Symmetric joint distribution over ordered pairs.
class AffinityMatrix {
public:
	static constexpr double kSumTolerance = 1e-8;

	explicit AffinityMatrix(Matrix p) : p_(std::move(p)) {
		if (p_.rows() != p_.cols() || p_.rows() < 2)
			throw InvalidArgument("affinity matrix must be square with N >= 2");
		if (!p_.allFinite() || (p_.array() < 0.0).any())
			throw InvalidArgument("affinity matrix entries must be finite and non-negative");
		if ((p_.diagonal().array() != 0.0).any())
			throw InvalidArgument("affinity matrix diagonal must be zero");
		if (!(p_ - p_.transpose()).isZero(0.0))
			throw InvalidArgument("affinity matrix must be symmetric");
		if (std::abs(p_.sum() - 1.0) > kSumTolerance)
			throw InvalidArgument("affinity matrix must sum to 1");
	}

	std::size_t size() const { return static_cast<std::size_t>(p_.rows()); }
	const Matrix& p() const { return p_; }

private:
	Matrix p_;
};

/// p_ij = (p_{j|i} + p_{i|j}) / 2N.
inline AffinityMatrix jointP(const Matrix& cond) {
	if (cond.rows() != cond.cols())
		throw InvalidArgument("conditional matrix must be square");
	const double n = static_cast<double>(cond.rows());
	Matrix p = (cond + cond.transpose()) / (2.0 * n);
	p.diagonal().setZero();
	return AffinityMatrix(std::move(p));
}

/// Calibrated joint affinities for a kernel in one call.
inline AffinityMatrix affinities(const DistanceKernel& k, double perplexity, std::size_t threads = 1) {
	const auto fits = calibrateSigmas(k, perplexity, threads);
	SigmaVector sigma(fits.size());
	for (std::size_t i = 0; i < fits.size(); ++i)
		sigma[i] = fits[i].sigma;
	return jointP(conditionalP(k, sigma, threads));
}

} // namespace snack::affinity
