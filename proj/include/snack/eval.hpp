/// @file  eval.hpp
/// @brief Clustering embeddings and scoring the clusters against labels.

#pragma once

#include <snack/affinity.hpp>
#include <snack/core.hpp>
#include <snack/io.hpp>
#include <snack/optimize.hpp>
#include <snack/triplets.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace snack::eval {

inline constexpr std::size_t kMaxLloydIters = 300;
inline constexpr std::size_t kDefaultRestarts = 10;

struct ClusterAssignment {
	std::vector<std::size_t> cluster;
	/// k x d; row c is the mean of the members of cluster c.
	Matrix centroids;
	double inertia = 0.0;
	/// Inertia after every assignment step of the winning restart.
	std::vector<double> history;
};

namespace detail {

inline double sqDist(const Matrix& y, Eigen::Index r, const Matrix& c, Eigen::Index s) {
	return (y.row(r) - c.row(s)).squaredNorm();
}

/// k-means++ seeding: first center uniform, the rest by squared distance.
inline Matrix seedCenters(const Matrix& y, std::size_t k, std::mt19937_64& rng) {
	const auto n = y.rows();
	Matrix centers(static_cast<Eigen::Index>(k), y.cols());
	std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
	centers.row(0) = y.row(first(rng));
	std::vector<double> d2(static_cast<std::size_t>(n));
	for (Eigen::Index r = 0; r < n; ++r)
		d2[static_cast<std::size_t>(r)] = sqDist(y, r, centers, 0);
	for (std::size_t c = 1; c < k; ++c) {
		double total = 0.0;
		for (double v : d2)
			total += v;
		Eigen::Index pick = 0;
		if (total > 0.0) {
			std::discrete_distribution<Eigen::Index> weighted(d2.begin(), d2.end());
			pick = weighted(rng);
		} else {
			pick = first(rng);
		}
		centers.row(static_cast<Eigen::Index>(c)) = y.row(pick);
		for (Eigen::Index r = 0; r < n; ++r)
			d2[static_cast<std::size_t>(r)] =
				std::min(d2[static_cast<std::size_t>(r)], sqDist(y, r, centers, static_cast<Eigen::Index>(c)));
	}
	return centers;
}

inline ClusterAssignment lloyd(const Matrix& y, Matrix centers) {
	const auto n = y.rows();
	const auto k = centers.rows();
	ClusterAssignment out;
	out.cluster.assign(static_cast<std::size_t>(n), std::numeric_limits<std::size_t>::max());
	for (std::size_t iter = 0; iter < kMaxLloydIters; ++iter) {
		bool changed = false;
		double inertia = 0.0;
		for (Eigen::Index r = 0; r < n; ++r) {
			Eigen::Index best = 0;
			double bestD = sqDist(y, r, centers, 0);
			for (Eigen::Index c = 1; c < k; ++c) {
				const double d = sqDist(y, r, centers, c);
				if (d < bestD) {
					bestD = d;
					best = c;
				}
			}
			inertia += bestD;
			auto& slot = out.cluster[static_cast<std::size_t>(r)];
			if (slot != static_cast<std::size_t>(best)) {
				slot = static_cast<std::size_t>(best);
				changed = true;
			}
		}
		out.history.push_back(inertia);
		out.inertia = inertia;
		if (!changed)
			break;
		// Empty clusters keep their previous center.
		Matrix sums = Matrix::Zero(k, y.cols());
		std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
		for (Eigen::Index r = 0; r < n; ++r) {
			const auto c = out.cluster[static_cast<std::size_t>(r)];
			sums.row(static_cast<Eigen::Index>(c)) += y.row(r);
			++counts[c];
		}
		for (Eigen::Index c = 0; c < k; ++c) {
			if (counts[static_cast<std::size_t>(c)] > 0)
				centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
		}
	}
	// Report exact member means for the final assignment.
	out.centroids = centers;
	Matrix sums = Matrix::Zero(k, y.cols());
	std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
	for (Eigen::Index r = 0; r < n; ++r) {
		const auto c = out.cluster[static_cast<std::size_t>(r)];
		sums.row(static_cast<Eigen::Index>(c)) += y.row(r);
		++counts[c];
	}
	for (Eigen::Index c = 0; c < k; ++c) {
		if (counts[static_cast<std::size_t>(c)] > 0)
			out.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
	}
	return out;
}

} // namespace detail

/// k-means++ seeded Lloyd iterations; the lowest-inertia restart wins
/// (earliest restart on ties). Deterministic per seed.
inline ClusterAssignment kmeans(const Matrix& y, std::size_t k, std::uint64_t seed,
	std::size_t restarts = kDefaultRestarts) {
	const auto n = static_cast<std::size_t>(y.rows());
	if (k < 1 || k > n)
		throw InvalidArgument("k = " + std::to_string(k) + " must lie in [1, N] with N = " + std::to_string(n));
	if (restarts < 1)
		throw InvalidArgument("at least one restart is required");
	std::optional<ClusterAssignment> best;
	for (std::size_t r = 0; r < restarts; ++r) {
		std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
			static_cast<std::uint32_t>(r)};
		std::mt19937_64 rng(seq);
		auto run = detail::lloyd(y, detail::seedCenters(y, k, rng));
		if (!best || run.inertia < best->inertia)
			best = std::move(run);
	}
	return std::move(*best);
}

inline ClusterAssignment kmeans(const Embedding& y, std::size_t k, std::uint64_t seed,
	std::size_t restarts = kDefaultRestarts) {
	return kmeans(y.coords(), k, seed, restarts);
}

/// Accuracy after relabeling each cluster with its most common true label
/// (smallest label id on ties).
inline double majorityLabelAccuracy(const std::vector<std::size_t>& cluster, const LabelVector& labels) {
	if (cluster.size() != labels.size())
		throw InvalidArgument("cluster and label vectors differ in length");
	if (cluster.empty())
		throw InvalidArgument("no objects to score");
	std::map<std::size_t, std::map<int, std::size_t>> votes;
	for (std::size_t i = 0; i < cluster.size(); ++i) {
		if (labels[i] < 0)
			throw InvalidArgument("object " + std::to_string(i) + " has no ground-truth label");
		++votes[cluster[i]][labels[i]];
	}
	std::size_t correct = 0;
	for (const auto& [c, counts] : votes) {
		std::size_t top = 0;
		for (const auto& [label, count] : counts)
			top = std::max(top, count);
		correct += top;
	}
	return static_cast<double>(correct) / static_cast<double>(cluster.size());
}

inline double majorityLabelAccuracy(const ClusterAssignment& assign, const LabelVector& labels) {
	return majorityLabelAccuracy(assign.cluster, labels);
}

inline std::size_t distinctLabels(const LabelVector& labels) {
	std::set<int> seen;
	for (int l : labels.labels) {
		if (l >= 0)
			seen.insert(l);
	}
	return seen.size();
}

struct CurvePoint {
	std::size_t n = 0;
	double mean_accuracy = 0.0;
	/// Standard error of the mean: sample std / sqrt(seeds).
	double sem = 0.0;
	std::size_t seeds = 0;
	std::vector<double> accuracies;
};

struct CurveOptions {
	std::size_t seeds = 5;
	/// Optional cap on the triplets sampled per point.
	std::optional<std::size_t> cap;
	std::size_t restarts = kDefaultRestarts;
};

/// Labeling accuracy against the number of revealed labels.
///
/// For each n and each repeat s, the labels of the first n objects yield the
/// triplets, the kernel plus triplets are embedded with seed cfg.seed + s,
/// k-means with k = number of classes clusters the result and the clusters are
/// scored by majority-label accuracy. With no triplets lambda is forced to 0.
inline std::vector<CurvePoint> labelingCurve(const DistanceKernel& k, const LabelVector& labels,
	const std::vector<std::size_t>& nValues, const EmbedConfig& cfg, const CurveOptions& opts = {}) {
	cfg.validate();
	if (labels.size() != k.size())
		throw InvalidArgument("label vector does not match kernel size");
	if (opts.seeds < 1)
		throw InvalidArgument("at least one seed is required");
	const std::size_t classes = distinctLabels(labels);
	if (classes < 1)
		throw InvalidArgument("no ground-truth labels");
	const auto p = affinity::affinities(k, cfg.perplexity, cfg.threads);
	std::vector<CurvePoint> out;
	for (std::size_t n : nValues) {
		CurvePoint point;
		point.n = n;
		point.seeds = opts.seeds;
		for (std::size_t s = 0; s < opts.seeds; ++s) {
			EmbedConfig run = cfg;
			run.seed = cfg.seed + s;
			const auto t = triplets::sampleFromLabels(labels, n, opts.cap, run.seed);
			if (t.empty())
				run.lambda = 0.0;
			const auto y0 = optimize::randomInit(k.size(), run.dims, run.seed);
			const auto result = optimize::embedFrom(p, t, y0, k.ids(), run);
			const auto assign = kmeans(result.embedding.coords(), classes, run.seed, opts.restarts);
			point.accuracies.push_back(majorityLabelAccuracy(assign, labels));
		}
		double mean = 0.0;
		for (double a : point.accuracies)
			mean += a;
		mean /= static_cast<double>(point.accuracies.size());
		double var = 0.0;
		for (double a : point.accuracies)
			var += (a - mean) * (a - mean);
		point.mean_accuracy = mean;
		point.sem = point.accuracies.size() > 1
			? std::sqrt(var / static_cast<double>(point.accuracies.size() - 1)) /
				std::sqrt(static_cast<double>(point.accuracies.size()))
			: 0.0;
		out.push_back(std::move(point));
	}
	return out;
}

inline void writeCurve(std::ostream& out, const std::vector<CurvePoint>& curve) {
	using io::detail::formatNumber;
	out << "n,mean_accuracy,sem,seeds\n";
	for (const auto& p : curve)
		out << p.n << ',' << formatNumber(p.mean_accuracy) << ',' << formatNumber(p.sem) << ',' << p.seeds << '\n';
}

} // namespace snack::eval
