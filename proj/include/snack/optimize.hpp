/// @file  optimize.hpp
/// @brief Momentum gradient descent on the combined neighbor + triplet cost.
///
/// Schedule: for the first exaggeration_iters iterations the affinities are
/// multiplied by exaggeration_factor and momentum_early is used; afterwards
/// the plain affinities and momentum_late are used until total_iters.

#pragma once

#include <snack/affinity.hpp>
#include <snack/core.hpp>
#include <snack/io.hpp>
#include <snack/loss.hpp>

#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace snack::optimize {

/// Standard deviation of the random initial coordinates.
inline constexpr double kInitScale = 1e-4;

/// One optimizer iteration, measured before the update is applied.
///
/// tsne_cost and tste_cost are the two weighted summands of total_cost, i.e.
/// (1 - lambda) * KL and lambda * NLL, so a term with zero weight reads 0.
/// The KL is always taken against the unexaggerated affinities.
struct TraceRecord {
	std::size_t iter = 0;
	double total_cost = 0.0;
	double tsne_cost = 0.0;
	double tste_cost = 0.0;
	double grad_norm = 0.0;

	bool operator==(const TraceRecord&) const = default;
};

using OptimizerTrace = std::vector<TraceRecord>;

struct EmbedResult {
	Embedding embedding;
	OptimizerTrace trace;
	/// The lambda actually used (resolved when the config asked for auto).
	double lambda = 0.0;
};

/// Seeded i.i.d. Gaussian coordinates with standard deviation @p scale.
inline Matrix randomInit(std::size_t n, std::size_t dims, std::uint64_t seed, double scale = kInitScale) {
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> normal(0.0, scale);
	Matrix y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
	for (Eigen::Index r = 0; r < y.rows(); ++r) {
		for (Eigen::Index c = 0; c < y.cols(); ++c)
			y(r, c) = normal(rng);
	}
	return y;
}

/// Lambda that equalizes lambda * |g_tste| and (1 - lambda) * |g_tsne| at @p y0.
inline double autoLambda(const affinity::AffinityMatrix& p, const TripletSet& triplets, const Matrix& y0, double alpha,
	std::size_t threads = 1) {
	if (triplets.empty())
		return 0.0;
	const double sne = loss::tsneCostGrad(p, y0, threads).grad.norm();
	const double ste = loss::tsteCostGrad(triplets, y0, alpha).grad.norm();
	if (sne + ste == 0.0)
		return 0.5;
	return sne / (sne + ste);
}

/// Runs the descent from the given start coordinates.
inline EmbedResult embedFrom(const affinity::AffinityMatrix& p, const TripletSet& triplets, Matrix y,
	const std::vector<std::string>& ids, const EmbedConfig& cfg) {
	cfg.validate();
	const auto n = static_cast<std::size_t>(y.rows());
	if (p.size() != n || ids.size() != n)
		throw InvalidArgument("affinities, start coordinates and ids disagree on N");
	if (static_cast<std::size_t>(y.cols()) != cfg.dims)
		throw InvalidArgument("start coordinates do not have the configured dimension");
	checkTriplets(triplets, n);

	const double lambda = cfg.lambda ? *cfg.lambda : autoLambda(p, triplets, y, cfg.alpha, cfg.threads);
	const bool useSne = lambda < 1.0;
	const bool useSte = lambda > 0.0 && !triplets.empty();

	EmbedResult result{Embedding(ids, y), {}, lambda};
	result.trace.reserve(cfg.total_iters);
	Matrix update = Matrix::Zero(y.rows(), y.cols());
	Matrix grad(y.rows(), y.cols());
	for (std::size_t it = 0; it < cfg.total_iters; ++it) {
		const bool early = it < cfg.exaggeration_iters;
		const double momentum = early ? cfg.momentum_early : cfg.momentum_late;
		TraceRecord rec;
		rec.iter = it;
		grad.setZero();
		if (useSne) {
			auto sne = loss::detail::tsneTerms(p.p(), y, early ? cfg.exaggeration_factor : 1.0, cfg.threads);
			rec.tsne_cost = (1.0 - lambda) * sne.cost;
			grad += (1.0 - lambda) * sne.grad;
		}
		if (useSte) {
			auto ste = loss::tsteCostGrad(triplets, y, cfg.alpha);
			rec.tste_cost = lambda * ste.cost;
			grad += lambda * ste.grad;
		}
		rec.total_cost = rec.tsne_cost + rec.tste_cost;
		rec.grad_norm = grad.norm();
		if (!std::isfinite(rec.total_cost) || !std::isfinite(rec.grad_norm))
			throw Error("non-finite cost at iteration " + std::to_string(it) + " (cost " +
				std::to_string(rec.total_cost) + ", gradient norm " + std::to_string(rec.grad_norm) + ")");
		result.trace.push_back(rec);
		update = momentum * update - cfg.learning_rate * grad;
		y += update;
	}
	if (!y.allFinite())
		throw Error("optimizer produced non-finite coordinates");
	result.embedding = Embedding(ids, std::move(y));
	return result;
}

/// Calibrates affinities for @p k and embeds from a seeded random start.
inline EmbedResult embed(const DistanceKernel& k, const TripletSet& triplets, const EmbedConfig& cfg) {
	cfg.validate();
	checkTriplets(triplets, k.size());
	const auto p = affinity::affinities(k, cfg.perplexity, cfg.threads);
	return embedFrom(p, triplets, randomInit(k.size(), cfg.dims, cfg.seed), k.ids(), cfg);
}

inline void writeTrace(std::ostream& out, const OptimizerTrace& trace) {
	using io::detail::formatNumber;
	out << "iter,total_cost,tsne_cost,tste_cost,grad_norm\n";
	for (const auto& r : trace) {
		out << r.iter << ',' << formatNumber(r.total_cost) << ',' << formatNumber(r.tsne_cost) << ','
			<< formatNumber(r.tste_cost) << ',' << formatNumber(r.grad_norm) << '\n';
	}
}

inline void saveTrace(const OptimizerTrace& trace, const std::string& path) {
	auto out = io::detail::openOut(path);
	writeTrace(out, trace);
	io::detail::finish(out, path);
}

} // namespace snack::optimize
