/// @file  io.hpp
/// @brief CSV readers and writers for features, kernels, triplets, labels and embeddings.
///
/// Identifiers are strings in files and dense indices in memory. Numbers are
/// written with 17 significant digits so that a save/load cycle reproduces
/// every double exactly.

#pragma once

#include <snack/core.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace snack::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
	const auto first = s.find_first_not_of(" \t\r\n");
	if (first == std::string_view::npos)
		return {};
	const auto last = s.find_last_not_of(" \t\r\n");
	return s.substr(first, last - first + 1);
}

inline std::vector<std::string> splitFields(std::string_view line, char sep = ',') {
	std::vector<std::string> out;
	std::size_t start = 0;
	while (true) {
		const auto pos = line.find(sep, start);
		out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
		if (pos == std::string_view::npos)
			break;
		start = pos + 1;
	}
	return out;
}

inline std::string where(const std::string& source, std::size_t line) {
	return source + ":" + std::to_string(line);
}

/// Parses a finite double or throws naming the location.
inline double parseNumber(const std::string& text, const std::string& source, std::size_t line) {
	double value = 0.0;
	const char* begin = text.data();
	const char* end = text.data() + text.size();
	if (!text.empty() && *begin == '+')
		++begin;
	const auto [ptr, ec] = std::from_chars(begin, end, value);
	if (ec != std::errc() || ptr != end || text.empty())
		throw ParseError(where(source, line) + ": cannot parse number '" + text + "'");
	if (!std::isfinite(value))
		throw ParseError(where(source, line) + ": non-finite value '" + text + "'");
	return value;
}

inline std::string formatNumber(double v) {
	char buf[32];
	const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
	return std::string(buf, static_cast<std::size_t>(len));
}

/// Reads non-blank lines that do not start with '#', keeping 1-based line numbers.
struct Line {
	std::size_t number;
	std::string text;
};

inline std::vector<Line> readLines(std::istream& in) {
	std::vector<Line> lines;
	std::string text;
	std::size_t number = 0;
	while (std::getline(in, text)) {
		++number;
		const auto t = trim(text);
		if (t.empty() || t.front() == '#')
			continue;
		lines.push_back({number, std::string(t)});
	}
	return lines;
}

inline std::ifstream openIn(const std::string& path) {
	std::ifstream in(path);
	if (!in)
		throw Error("cannot open '" + path + "' for reading");
	return in;
}

inline std::ofstream openOut(const std::string& path) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		throw Error("cannot open '" + path + "' for writing");
	return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
	out.flush();
	if (!out)
		throw Error("write to '" + path + "' failed");
}

/// Parses "id,v0,...,v{D-1}" tables shared by features and embeddings.
inline std::pair<std::vector<std::string>, Matrix> readTable(std::istream& in, const std::string& source) {
	const auto lines = readLines(in);
	if (lines.size() < 2)
		throw ParseError(source + ": no rows");
	const auto header = splitFields(lines.front().text);
	if (header.size() < 2)
		throw ParseError(where(source, lines.front().number) + ": header needs an id column and at least one value column");
	const auto width = header.size() - 1;
	std::vector<std::string> ids;
	Matrix values(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(width));
	for (std::size_t r = 1; r < lines.size(); ++r) {
		const auto& line = lines[r];
		const auto fields = splitFields(line.text);
		if (fields.size() != width + 1)
			throw ParseError(where(source, line.number) + ": expected " + std::to_string(width + 1) +
				" fields, found " + std::to_string(fields.size()));
		if (fields[0].empty())
			throw ParseError(where(source, line.number) + ": empty id");
		ids.push_back(fields[0]);
		for (std::size_t c = 0; c < width; ++c)
			values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) =
				parseNumber(fields[c + 1], source, line.number);
	}
	// Duplicate ids are reported with the line where they recur.
	std::unordered_map<std::string, std::size_t> seen;
	for (std::size_t r = 0; r < ids.size(); ++r) {
		if (!seen.emplace(ids[r], r).second)
			throw ParseError(where(source, lines[r + 1].number) + ": duplicate id '" + ids[r] + "'");
	}
	return {std::move(ids), std::move(values)};
}

inline void writeTable(std::ostream& out, const std::vector<std::string>& ids, const Matrix& values, char prefix) {
	out << "id";
	for (Eigen::Index c = 0; c < values.cols(); ++c)
		out << ',' << prefix << c;
	out << '\n';
	for (Eigen::Index r = 0; r < values.rows(); ++r) {
		out << ids[static_cast<std::size_t>(r)];
		for (Eigen::Index c = 0; c < values.cols(); ++c)
			out << ',' << formatNumber(values(r, c));
		out << '\n';
	}
}

} // namespace detail

// ---------------------------------------------------------------- features

inline FeatureMatrix readFeatures(std::istream& in, const std::string& source = "<features>") {
	auto [ids, values] = detail::readTable(in, source);
	return FeatureMatrix(std::move(ids), std::move(values));
}

inline FeatureMatrix loadFeatures(const std::string& path) {
	auto in = detail::openIn(path);
	return readFeatures(in, path);
}

inline void writeFeatures(std::ostream& out, const FeatureMatrix& f) {
	detail::writeTable(out, f.ids(), f.values(), 'f');
}

inline void saveFeatures(const FeatureMatrix& f, const std::string& path) {
	auto out = detail::openOut(path);
	writeFeatures(out, f);
	detail::finish(out, path);
}

// ---------------------------------------------------------------- embeddings

inline Embedding readEmbedding(std::istream& in, const std::string& source = "<embedding>") {
	auto [ids, values] = detail::readTable(in, source);
	return Embedding(std::move(ids), std::move(values));
}

inline Embedding loadEmbedding(const std::string& path) {
	auto in = detail::openIn(path);
	return readEmbedding(in, path);
}

inline void writeEmbedding(std::ostream& out, const Embedding& y) {
	detail::writeTable(out, y.ids(), y.coords(), 'x');
}

inline void saveEmbedding(const Embedding& y, const std::string& path) {
	auto out = detail::openOut(path);
	writeEmbedding(out, y);
	detail::finish(out, path);
}

// ---------------------------------------------------------------- kernels

inline DistanceKernel readKernel(std::istream& in, const std::string& source = "<kernel>") {
	const auto lines = detail::readLines(in);
	if (lines.empty())
		throw ParseError(source + ": no rows");
	auto ids = detail::splitFields(lines.front().text);
	const auto n = ids.size();
	if (lines.size() != n + 1)
		throw ParseError(source + ": header names " + std::to_string(n) + " ids but found " +
			std::to_string(lines.size() - 1) + " rows");
	Matrix dist(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
	for (std::size_t r = 0; r < n; ++r) {
		const auto& line = lines[r + 1];
		const auto fields = detail::splitFields(line.text);
		if (fields.size() != n)
			throw ParseError(detail::where(source, line.number) + ": expected " + std::to_string(n) +
				" distances, found " + std::to_string(fields.size()));
		for (std::size_t c = 0; c < n; ++c)
			dist(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
				detail::parseNumber(fields[c], source, line.number);
	}
	try {
		return DistanceKernel(std::move(ids), std::move(dist));
	} catch (const InvalidArgument& e) {
		throw ParseError(source + ": " + e.what());
	}
}

inline DistanceKernel loadKernel(const std::string& path) {
	auto in = detail::openIn(path);
	return readKernel(in, path);
}

/// Writes the full matrix; @p comment, if non-empty, becomes a leading '#' line.
inline void writeKernel(std::ostream& out, const DistanceKernel& k, const std::string& comment = {}) {
	if (!comment.empty())
		out << "# " << comment << '\n';
	const auto& ids = k.ids();
	for (std::size_t i = 0; i < ids.size(); ++i)
		out << (i ? "," : "") << ids[i];
	out << '\n';
	const auto& d = k.dist();
	for (Eigen::Index r = 0; r < d.rows(); ++r) {
		for (Eigen::Index c = 0; c < d.cols(); ++c)
			out << (c ? "," : "") << detail::formatNumber(d(r, c));
		out << '\n';
	}
}

inline void saveKernel(const DistanceKernel& k, const std::string& path, const std::string& comment = {}) {
	auto out = detail::openOut(path);
	writeKernel(out, k, comment);
	detail::finish(out, path);
}

/// Validates a raw matrix before writing so that no invalid kernel reaches disk.
inline void saveKernel(const std::vector<std::string>& ids, const Matrix& dist, const std::string& path) {
	DistanceKernel::validate(dist);
	saveKernel(DistanceKernel(ids, dist), path);
}

// ---------------------------------------------------------------- triplets

inline TripletSet readTriplets(std::istream& in, const IdIndex& ids, const std::string& source = "<triplets>") {
	const auto lines = detail::readLines(in);
	if (lines.empty())
		throw ParseError(source + ": missing header");
	TripletSet out;
	out.reserve(lines.size() - 1);
	for (std::size_t r = 1; r < lines.size(); ++r) {
		const auto& line = lines[r];
		const auto fields = detail::splitFields(line.text);
		if (fields.size() != 3)
			throw ParseError(detail::where(source, line.number) + ": expected 3 ids");
		std::size_t idx[3];
		for (int c = 0; c < 3; ++c) {
			auto found = ids.find(fields[static_cast<std::size_t>(c)]);
			if (!found)
				throw ParseError(detail::where(source, line.number) + ": unknown id '" +
					fields[static_cast<std::size_t>(c)] + "'");
			idx[c] = *found;
		}
		Triplet t{idx[0], idx[1], idx[2]};
		if (t.degenerate())
			throw ParseError(detail::where(source, line.number) + ": degenerate triplet repeats an object");
		out.push_back(t);
	}
	return out;
}

inline TripletSet loadTriplets(const std::string& path, const IdIndex& ids) {
	auto in = detail::openIn(path);
	return readTriplets(in, ids, path);
}

inline void writeTriplets(std::ostream& out, const TripletSet& triplets, const IdIndex& ids) {
	out << "i,j,k\n";
	for (const auto& t : triplets)
		out << ids.id(t.i) << ',' << ids.id(t.j) << ',' << ids.id(t.k) << '\n';
}

inline void saveTriplets(const TripletSet& triplets, const IdIndex& ids, const std::string& path) {
	auto out = detail::openOut(path);
	writeTriplets(out, triplets, ids);
	detail::finish(out, path);
}

// ---------------------------------------------------------------- labels

/// Ids absent from the file stay unrevealed; ids unknown to @p ids are an error.
inline LabelVector readLabels(std::istream& in, const IdIndex& ids, const std::string& source = "<labels>") {
	const auto lines = detail::readLines(in);
	if (lines.empty())
		throw ParseError(source + ": missing header");
	LabelVector out{std::vector<int>(ids.size(), LabelVector::kUnrevealed)};
	for (std::size_t r = 1; r < lines.size(); ++r) {
		const auto& line = lines[r];
		const auto fields = detail::splitFields(line.text);
		if (fields.size() != 2)
			throw ParseError(detail::where(source, line.number) + ": expected id,label");
		auto idx = ids.find(fields[0]);
		if (!idx)
			throw ParseError(detail::where(source, line.number) + ": unknown id '" + fields[0] + "'");
		int label = 0;
		const auto& text = fields[1];
		const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), label);
		if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
			throw ParseError(detail::where(source, line.number) + ": bad label '" + text + "'");
		out.labels[*idx] = label;
	}
	return out;
}

inline LabelVector loadLabels(const std::string& path, const IdIndex& ids) {
	auto in = detail::openIn(path);
	return readLabels(in, ids, path);
}

/// Labels keyed by the file's own row order, for commands without another id source.
struct LabelTable {
	IdIndex ids;
	LabelVector labels;
};

inline LabelTable readLabelTable(std::istream& in, const std::string& source = "<labels>") {
	const auto lines = detail::readLines(in);
	if (lines.size() < 2)
		throw ParseError(source + ": no rows");
	std::vector<std::string> ids;
	for (std::size_t r = 1; r < lines.size(); ++r) {
		const auto fields = detail::splitFields(lines[r].text);
		if (fields.size() != 2)
			throw ParseError(detail::where(source, lines[r].number) + ": expected id,label");
		ids.push_back(fields[0]);
	}
	IdIndex index;
	try {
		index = IdIndex(std::move(ids));
	} catch (const InvalidArgument& e) {
		throw ParseError(source + ": " + e.what());
	}
	std::ostringstream text;
	for (const auto& line : lines)
		text << line.text << '\n';
	std::istringstream again(text.str());
	auto labels = readLabels(again, index, source);
	return {std::move(index), std::move(labels)};
}

inline LabelTable loadLabelTable(const std::string& path) {
	auto in = detail::openIn(path);
	return readLabelTable(in, path);
}

inline void writeLabels(std::ostream& out, const LabelVector& labels, const IdIndex& ids) {
	out << "id,label\n";
	for (std::size_t i = 0; i < labels.size(); ++i) {
		if (labels[i] != LabelVector::kUnrevealed)
			out << ids.id(i) << ',' << labels[i] << '\n';
	}
}

inline void saveLabels(const LabelVector& labels, const IdIndex& ids, const std::string& path) {
	auto out = detail::openOut(path);
	writeLabels(out, labels, ids);
	detail::finish(out, path);
}

} // namespace snack::io
