/// @file  core.hpp
/// @brief Domain types shared by every stage of the embedding pipeline.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace snack {

/// Dense row-major matrix; rows are objects.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// Malformed input file or argument.
class ParseError : public Error {
public:
	using Error::Error;
};

/// A value violates a type invariant or an operation precondition.
class InvalidArgument : public Error {
public:
	using Error::Error;
};

/// Bidirectional mapping between string identifiers and dense indices.
class IdIndex {
public:
	IdIndex() = default;

	explicit IdIndex(std::vector<std::string> ids) : ids_(std::move(ids)) {
		index_.reserve(ids_.size());
		for (std::size_t i = 0; i < ids_.size(); ++i) {
			if (!index_.emplace(ids_[i], i).second)
				throw InvalidArgument("duplicate id '" + ids_[i] + "'");
		}
	}

	std::size_t size() const { return ids_.size(); }
	const std::vector<std::string>& ids() const { return ids_; }
	const std::string& id(std::size_t i) const { return ids_.at(i); }

	std::optional<std::size_t> find(const std::string& id) const {
		auto it = index_.find(id);
		if (it == index_.end())
			return std::nullopt;
		return it->second;
	}

	std::size_t at(const std::string& id) const {
		auto i = find(id);
		if (!i)
			throw InvalidArgument("unknown id '" + id + "'");
		return *i;
	}

	bool operator==(const IdIndex& other) const { return ids_ == other.ids_; }

private:
	std::vector<std::string> ids_;
	std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline bool allFinite(const Matrix& m) {
	return m.allFinite();
}

} // namespace detail

/// N objects by D machine features.
class FeatureMatrix {
public:
	FeatureMatrix(std::vector<std::string> ids, Matrix values)
		: ids_(std::move(ids)), values_(std::move(values)) {
		if (values_.rows() < 1 || values_.cols() < 1)
			throw InvalidArgument("feature matrix needs at least one row and one column");
		if (static_cast<std::size_t>(values_.rows()) != ids_.size())
			throw InvalidArgument("feature matrix row count does not match id count");
		if (!detail::allFinite(values_))
			throw InvalidArgument("feature matrix contains non-finite values");
	}

	std::size_t size() const { return ids_.size(); }
	std::size_t dims() const { return static_cast<std::size_t>(values_.cols()); }
	const IdIndex& index() const { return ids_; }
	const std::vector<std::string>& ids() const { return ids_.ids(); }
	const Matrix& values() const { return values_; }

private:
	IdIndex ids_;
	Matrix values_;
};

/// Symmetric, zero-diagonal, non-negative N x N distance matrix.
class DistanceKernel {
public:
	/// Tolerance on |d_ij - d_ji| accepted before symmetrizing.
	static constexpr double kSymmetryTolerance = 1e-9;

	DistanceKernel(std::vector<std::string> ids, Matrix dist)
		: ids_(std::move(ids)), dist_(std::move(dist)) {
		const auto n = static_cast<Eigen::Index>(ids_.size());
		if (n < 1)
			throw InvalidArgument("kernel needs at least one object");
		if (dist_.rows() != n || dist_.cols() != n)
			throw InvalidArgument("kernel must be " + std::to_string(n) + "x" + std::to_string(n));
		validate(dist_);
		Matrix sym = 0.5 * (dist_ + dist_.transpose());
		dist_ = std::move(sym);
		dist_.diagonal().setZero();
	}

	/// Throws InvalidArgument if @p d cannot be a distance kernel.
	static void validate(const Matrix& d) {
		if (d.rows() != d.cols())
			throw InvalidArgument("kernel matrix is not square");
		if (!d.allFinite())
			throw InvalidArgument("kernel contains non-finite values");
		for (Eigen::Index i = 0; i < d.rows(); ++i) {
			if (d(i, i) != 0.0)
				throw InvalidArgument("kernel diagonal entry " + std::to_string(i) + " is not zero");
			for (Eigen::Index j = 0; j < d.cols(); ++j) {
				if (d(i, j) < 0.0)
					throw InvalidArgument("kernel entry (" + std::to_string(i) + "," +
						std::to_string(j) + ") is negative");
				if (std::abs(d(i, j) - d(j, i)) > kSymmetryTolerance)
					throw InvalidArgument("kernel is not symmetric at (" + std::to_string(i) + "," +
						std::to_string(j) + ")");
			}
		}
	}

	std::size_t size() const { return ids_.size(); }
	const IdIndex& index() const { return ids_; }
	const std::vector<std::string>& ids() const { return ids_.ids(); }
	const Matrix& dist() const { return dist_; }
	double operator()(std::size_t i, std::size_t j) const {
		return dist_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
	}

private:
	IdIndex ids_;
	Matrix dist_;
};

/// "i is closer to j than to k".
struct Triplet {
	std::size_t i = 0;
	std::size_t j = 0;
	std::size_t k = 0;

	bool degenerate() const { return i == j || i == k || j == k; }
	Triplet swapped() const { return {i, k, j}; }
	auto operator<=>(const Triplet&) const = default;
};

/// Ordered list of triplet constraints; repeats are allowed.
using TripletSet = std::vector<Triplet>;

/// Throws unless every triplet is non-degenerate with indices below @p n.
inline void checkTriplets(const TripletSet& triplets, std::size_t n) {
	for (std::size_t t = 0; t < triplets.size(); ++t) {
		const auto& tr = triplets[t];
		if (tr.i >= n || tr.j >= n || tr.k >= n)
			throw InvalidArgument("triplet " + std::to_string(t) + " has an index out of range");
		if (tr.degenerate())
			throw InvalidArgument("triplet " + std::to_string(t) + " repeats an object");
	}
}

/// N x d output coordinates.
class Embedding {
public:
	Embedding(std::vector<std::string> ids, Matrix coords)
		: ids_(std::move(ids)), coords_(std::move(coords)) {
		if (coords_.cols() < 1)
			throw InvalidArgument("embedding needs at least one dimension");
		if (static_cast<std::size_t>(coords_.rows()) != ids_.size())
			throw InvalidArgument("embedding row count does not match id count");
		if (!coords_.allFinite())
			throw InvalidArgument("embedding contains non-finite coordinates");
	}

	std::size_t size() const { return ids_.size(); }
	std::size_t dims() const { return static_cast<std::size_t>(coords_.cols()); }
	const IdIndex& index() const { return ids_; }
	const std::vector<std::string>& ids() const { return ids_.ids(); }
	const Matrix& coords() const { return coords_; }

private:
	IdIndex ids_;
	Matrix coords_;
};

/// Class id per object; kUnrevealed marks an unknown label.
struct LabelVector {
	static constexpr int kUnrevealed = -1;
	std::vector<int> labels;

	std::size_t size() const { return labels.size(); }
	int operator[](std::size_t i) const { return labels[i]; }
};

/// Optimization settings for a single embedding run.
struct EmbedConfig {
	/// Weight of the triplet term; nullopt selects it automatically.
	std::optional<double> lambda = 0.0;
	double alpha = 1.0;
	double perplexity = 30.0;
	std::size_t dims = 2;
	std::size_t total_iters = 300;
	std::size_t exaggeration_iters = 100;
	double exaggeration_factor = 4.0;
	double learning_rate = 200.0;
	double momentum_early = 0.5;
	double momentum_late = 0.8;
	std::uint64_t seed = 0;
	/// Worker threads for the dense pairwise work; results do not depend on it.
	std::size_t threads = 1;

	void validate() const {
		if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0))
			throw InvalidArgument("lambda must lie in [0,1]");
		if (!(alpha > 0.0))
			throw InvalidArgument("alpha must be positive");
		if (!(perplexity > 1.0))
			throw InvalidArgument("perplexity must exceed 1");
		if (dims < 1)
			throw InvalidArgument("output dimension must be at least 1");
		if (exaggeration_iters > total_iters)
			throw InvalidArgument("exaggeration iterations exceed total iterations");
		if (!(exaggeration_factor > 0.0) || !(learning_rate > 0.0))
			throw InvalidArgument("exaggeration factor and learning rate must be positive");
		if (momentum_early < 0.0 || momentum_early >= 1.0 || momentum_late < 0.0 || momentum_late >= 1.0)
			throw InvalidArgument("momentum must lie in [0,1)");
		if (threads < 1)
			throw InvalidArgument("thread count must be at least 1");
	}
};

} // namespace snack
