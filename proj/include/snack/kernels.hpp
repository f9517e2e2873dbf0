/// @file  kernels.hpp
/// @brief Distance kernels computed from machine data.
///
/// Two constructions: Euclidean distances between feature rows, and an
/// ingredient-list kernel scoring two token lists by the best one-to-one
/// matching of their unit-norm token vectors.

#pragma once

#include <snack/assignment.hpp>
#include <snack/core.hpp>
#include <snack/io.hpp>
#include <snack/parallel.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace snack::kernels {

inline DistanceKernel euclideanKernel(const FeatureMatrix& f) {
	const Matrix& x = f.values();
	const auto n = x.rows();
	Matrix d = Matrix::Zero(n, n);
	for (Eigen::Index i = 0; i < n; ++i) {
		for (Eigen::Index j = i + 1; j < n; ++j) {
			const double v = (x.row(i) - x.row(j)).norm();
			d(i, j) = v;
			d(j, i) = v;
		}
	}
	return DistanceKernel(f.ids(), std::move(d));
}

/// Case-folded, whitespace-trimmed token key.
inline std::string normalizeToken(std::string_view token) {
	std::string out(io::detail::trim(token));
	std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
	return out;
}

/// Token -> unit-norm vector.
class TokenEmbeddingTable {
public:
	explicit TokenEmbeddingTable(std::size_t dims) : dims_(dims) {
		if (dims_ < 1)
			throw InvalidArgument("token vectors need at least one dimension");
	}

	/// Stores @p vec rescaled to unit norm; a later entry for the same token wins.
	void add(std::string_view token, Vector vec) {
		if (static_cast<std::size_t>(vec.size()) != dims_)
			throw InvalidArgument("token '" + std::string(token) + "' has dimension " + std::to_string(vec.size()) +
				", expected " + std::to_string(dims_));
		const double norm = vec.norm();
		if (!(norm > 0.0) || !std::isfinite(norm))
			throw InvalidArgument("token '" + std::string(token) + "' has a zero or non-finite vector");
		table_[normalizeToken(token)] = vec / norm;
	}

	const Vector& at(std::string_view token) const {
		auto it = table_.find(normalizeToken(token));
		if (it == table_.end())
			throw InvalidArgument("unknown token '" + std::string(token) + "'");
		return it->second;
	}

	bool contains(std::string_view token) const { return table_.count(normalizeToken(token)) > 0; }
	std::size_t dims() const { return dims_; }
	std::size_t size() const { return table_.size(); }

private:
	std::size_t dims_;
	std::map<std::string, Vector, std::less<>> table_;
};

using TokenList = std::vector<std::string>;

/// Per-object token lists, e.g. ingredient lists.
struct TokenListCollection {
	std::vector<std::string> ids;
	std::vector<TokenList> lists;

	void validate(const TokenEmbeddingTable& table) const {
		if (ids.size() != lists.size())
			throw InvalidArgument("token collection ids and lists differ in length");
		for (std::size_t i = 0; i < lists.size(); ++i) {
			if (lists[i].empty())
				throw InvalidArgument("object '" + ids[i] + "' has an empty token list");
			for (const auto& t : lists[i])
				table.at(t);
		}
	}
};

/// Best total dot product over one-to-one matchings that cover the shorter list.
inline double assignmentSimilarity(const TokenList& a, const TokenList& b, const TokenEmbeddingTable& table) {
	if (a.empty() || b.empty())
		throw InvalidArgument("token lists must be non-empty");
	Matrix w(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
	for (std::size_t r = 0; r < a.size(); ++r) {
		const Vector& va = table.at(a[r]);
		for (std::size_t c = 0; c < b.size(); ++c)
			w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = va.dot(table.at(b[c]));
	}
	return assignment::maxWeightMatching(w);
}

struct AssignmentKernel {
	DistanceKernel kernel;
	/// Constant subtracted from the negated similarities to make them non-negative.
	double shift = 0.0;
};

/// Negated matching similarity, shifted so the closest distinct pair sits at 0.
inline AssignmentKernel assignmentKernel(const TokenListCollection& lists, const TokenEmbeddingTable& table,
	std::size_t threads = 1) {
	lists.validate(table);
	const std::size_t n = lists.ids.size();
	if (n == 0)
		throw InvalidArgument("token collection is empty");
	Matrix raw = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
	detail::parallelFor(n, threads, [&](std::size_t i) {
		for (std::size_t j = i + 1; j < n; ++j)
			raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
				-assignmentSimilarity(lists.lists[i], lists.lists[j], table);
	});
	double shift = 0.0;
	if (n > 1) {
		shift = std::numeric_limits<double>::infinity();
		for (std::size_t i = 0; i < n; ++i) {
			for (std::size_t j = i + 1; j < n; ++j)
				shift = std::min(shift, raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
		}
	}
	Matrix dist = Matrix::Zero(raw.rows(), raw.cols());
	for (Eigen::Index i = 0; i < raw.rows(); ++i) {
		for (Eigen::Index j = i + 1; j < raw.cols(); ++j) {
			const double v = std::max(0.0, raw(i, j) - shift);
			dist(i, j) = v;
			dist(j, i) = v;
		}
	}
	return {DistanceKernel(lists.ids, std::move(dist)), shift};
}

// ---------------------------------------------------------------- files

/// Text vectors: "token v1 ... vE" per line; vectors are renormalized.
inline TokenEmbeddingTable readTokenVectors(std::istream& in, const std::string& source = "<vectors>") {
	std::optional<TokenEmbeddingTable> table;
	std::string line;
	std::size_t number = 0;
	while (std::getline(in, line)) {
		++number;
		std::istringstream fields(line);
		std::string token;
		if (!(fields >> token) || token.front() == '#')
			continue;
		std::vector<double> values;
		std::string word;
		while (fields >> word)
			values.push_back(io::detail::parseNumber(word, source, number));
		if (values.empty())
			throw ParseError(source + ":" + std::to_string(number) + ": token '" + token + "' has no vector");
		if (!table)
			table.emplace(values.size());
		try {
			table->add(token, Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
		} catch (const InvalidArgument& e) {
			throw ParseError(source + ":" + std::to_string(number) + ": " + e.what());
		}
	}
	if (!table)
		throw ParseError(source + ": no vectors");
	return std::move(*table);
}

inline TokenEmbeddingTable loadTokenVectors(const std::string& path) {
	auto in = io::detail::openIn(path);
	return readTokenVectors(in, path);
}

/// "id,tok1;tok2;..." rows after an optional header whose first field is "id".
inline TokenListCollection readTokenLists(std::istream& in, const std::string& source = "<tokens>") {
	TokenListCollection out;
	const auto lines = io::detail::readLines(in);
	for (std::size_t r = 0; r < lines.size(); ++r) {
		const auto& line = lines[r];
		const auto comma = line.text.find(',');
		if (comma == std::string::npos)
			throw ParseError(io::detail::where(source, line.number) + ": expected id,tokens");
		const std::string id(io::detail::trim(std::string_view(line.text).substr(0, comma)));
		if (r == 0 && id == "id")
			continue;
		TokenList tokens;
		for (auto& t : io::detail::splitFields(std::string_view(line.text).substr(comma + 1), ';')) {
			if (!t.empty())
				tokens.push_back(normalizeToken(t));
		}
		if (tokens.empty())
			throw ParseError(io::detail::where(source, line.number) + ": object '" + id + "' has no tokens");
		out.ids.push_back(id);
		out.lists.push_back(std::move(tokens));
	}
	if (out.ids.empty())
		throw ParseError(source + ": no rows");
	try {
		IdIndex check(out.ids);
	} catch (const InvalidArgument& e) {
		throw ParseError(source + ": " + e.what());
	}
	return out;
}

inline TokenListCollection loadTokenLists(const std::string& path) {
	auto in = io::detail::openIn(path);
	return readTokenLists(in, path);
}

} // namespace snack::kernels
