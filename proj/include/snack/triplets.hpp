/// @file  triplets.hpp
/// @brief Generating, splitting and scoring triplet constraint sets.

#pragma once

#include <snack/core.hpp>
#include <snack/loss.hpp>

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace snack::triplets {

/// Number of ordered (i, j, k), all < n, with label[i] == label[j] != label[k], i != j.
inline std::uint64_t countLabelTriplets(const LabelVector& labels, std::size_t n) {
	std::map<int, std::uint64_t> counts;
	for (std::size_t i = 0; i < n; ++i)
		++counts[labels[i]];
	std::uint64_t total = 0;
	for (const auto& [label, c] : counts)
		total += c * (c - 1) * (n - c);
	return total;
}

/// All label-derived triplets among the first @p n objects, optionally
/// thinned to @p cap triplets drawn uniformly without replacement.
/// Output follows (i, j, k) lexicographic order either way.
inline TripletSet sampleFromLabels(const LabelVector& labels, std::size_t n, std::optional<std::size_t> cap,
	std::uint64_t seed) {
	if (n > labels.size())
		throw InvalidArgument("n = " + std::to_string(n) + " exceeds the number of objects");
	for (std::size_t i = 0; i < n; ++i) {
		if (labels[i] < 0)
			throw InvalidArgument("object " + std::to_string(i) + " is among the first n but has no revealed label");
	}
	const std::uint64_t total = countLabelTriplets(labels, n);
	std::vector<std::uint64_t> keep;
	const bool thin = cap && *cap < total;
	if (thin) {
		// Floyd's algorithm: cap distinct ranks out of [0, total).
		std::mt19937_64 rng(seed);
		std::unordered_set<std::uint64_t> chosen;
		chosen.reserve(*cap * 2);
		for (std::uint64_t j = total - *cap; j < total; ++j) {
			std::uniform_int_distribution<std::uint64_t> pick(0, j);
			const auto t = pick(rng);
			if (!chosen.insert(t).second)
				chosen.insert(j);
		}
		keep.assign(chosen.begin(), chosen.end());
		std::sort(keep.begin(), keep.end());
	}
	TripletSet out;
	out.reserve(thin ? keep.size() : static_cast<std::size_t>(total));
	std::uint64_t rank = 0;
	auto next = keep.begin();
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = 0; j < n; ++j) {
			if (j == i || labels[j] != labels[i])
				continue;
			for (std::size_t k = 0; k < n; ++k) {
				if (labels[k] == labels[i])
					continue;
				if (!thin) {
					out.push_back({i, j, k});
				} else if (next != keep.end() && *next == rank) {
					out.push_back({i, j, k});
					++next;
				}
				++rank;
			}
		}
	}
	return out;
}

/// {(ref, j, k) : j in selected, k in shown \ selected}.
inline TripletSet expandSelection(std::size_t ref, const std::vector<std::size_t>& selected,
	const std::vector<std::size_t>& shown) {
	const std::set<std::size_t> grid(shown.begin(), shown.end());
	if (grid.size() != shown.size())
		throw InvalidArgument("shown set contains duplicates");
	if (grid.count(ref))
		throw InvalidArgument("reference object is part of the shown set");
	const std::set<std::size_t> same(selected.begin(), selected.end());
	if (same.size() != selected.size())
		throw InvalidArgument("selected set contains duplicates");
	for (auto s : selected) {
		if (!grid.count(s))
			throw InvalidArgument("selected object " + std::to_string(s) + " was not shown");
	}
	TripletSet out;
	out.reserve(selected.size() * (shown.size() - selected.size()));
	for (auto j : selected) {
		for (auto k : shown) {
			if (!same.count(k))
				out.push_back({ref, j, k});
		}
	}
	return out;
}

struct Split {
	TripletSet train;
	TripletSet test;
};

/// Random partition by position; round(fraction * M) triplets go to test.
/// Each part keeps the input's relative order.
inline Split split(const TripletSet& triplets, double testFraction, std::uint64_t seed) {
	if (triplets.empty())
		throw InvalidArgument("cannot split an empty triplet set");
	if (!(testFraction > 0.0 && testFraction < 1.0))
		throw InvalidArgument("test fraction must lie in (0,1)");
	const std::size_t m = triplets.size();
	const auto testSize = static_cast<std::size_t>(std::llround(testFraction * static_cast<double>(m)));
	std::vector<std::size_t> order(m);
	std::iota(order.begin(), order.end(), 0);
	std::mt19937_64 rng(seed);
	std::shuffle(order.begin(), order.end(), rng);
	std::vector<bool> isTest(m, false);
	for (std::size_t t = 0; t < testSize; ++t)
		isTest[order[t]] = true;
	Split out;
	out.test.reserve(testSize);
	out.train.reserve(m - testSize);
	for (std::size_t t = 0; t < m; ++t)
		(isTest[t] ? out.test : out.train).push_back(triplets[t]);
	return out;
}

/// Fraction of triplets with |y_i - y_j|^2 >= |y_i - y_k|^2; ties count as violated.
inline double violationFraction(const Matrix& y, const TripletSet& triplets) {
	if (triplets.empty())
		throw InvalidArgument("violation fraction of an empty triplet set is undefined");
	checkTriplets(triplets, static_cast<std::size_t>(y.rows()));
	std::size_t bad = 0;
	for (const auto& t : triplets) {
		if (loss::detail::sqDist(y, t.i, t.j) >= loss::detail::sqDist(y, t.i, t.k))
			++bad;
	}
	return static_cast<double>(bad) / static_cast<double>(triplets.size());
}

inline double violationFraction(const Embedding& y, const TripletSet& triplets) {
	return violationFraction(y.coords(), triplets);
}

} // namespace snack::triplets
