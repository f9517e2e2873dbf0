/// @file  cli.hpp
/// @brief The `snack` command-line frontend.
///
/// Subcommands wrap library calls one-to-one:
///   kernel euclidean|assignment   build kernel.csv
///   embed                         kernel (+ triplets) -> embedding.csv, trace.csv
///   sample labels|screens         produce triplets.csv
///   eval triplet-error|labeling|lambda-sweep
///   serve                         run the session service
/// Exit status is 0 on success and 2 on any error; errors go to the error stream.

#pragma once

#include <snack/snack.hpp>
#include <snack/http.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace snack::cli {

inline constexpr int kExitError = 2;

namespace detail {

struct EmbedFlags {
	std::string lambda;
	double alpha = 1.0;
	double perplexity = 30.0;
	std::size_t iters = 300;
	/// Unset means min(100, iters).
	std::optional<std::size_t> exaggerationIters;
	std::uint64_t seed = 0;
	std::size_t threads = 1;

	void add(CLI::App* app) {
		app->add_option("--lambda", lambda, "Triplet weight in [0,1] or 'auto'");
		app->add_option("--alpha", alpha, "Degrees of freedom of the triplet kernel")->capture_default_str();
		app->add_option("--perplexity", perplexity, "Target perplexity of the neighbor affinities")
			->capture_default_str();
		app->add_option("--iters", iters, "Total gradient-descent iterations")->capture_default_str();
		app->add_option("--exaggeration-iters", exaggerationIters,
			"Iterations with exaggerated affinities (default: min(100, iters))");
		app->add_option("--seed", seed, "Seed for all randomness")->capture_default_str();
		app->add_option("--threads", threads, "Worker threads (results do not depend on it)")->capture_default_str();
	}

	/// Builds the config; @p haveTriplets decides the default lambda.
	EmbedConfig config(bool haveTriplets) const {
		EmbedConfig cfg;
		cfg.alpha = alpha;
		cfg.perplexity = perplexity;
		cfg.total_iters = iters;
		cfg.exaggeration_iters = exaggerationIters ? *exaggerationIters : std::min<std::size_t>(100, iters);
		cfg.seed = seed;
		cfg.threads = threads;
		if (lambda.empty()) {
			cfg.lambda = haveTriplets ? std::nullopt : std::optional<double>(0.0);
		} else if (lambda == "auto") {
			cfg.lambda = std::nullopt;
		} else {
			try {
				std::size_t used = 0;
				cfg.lambda = std::stod(lambda, &used);
				if (used != lambda.size())
					throw std::invalid_argument(lambda);
			} catch (const std::exception&) {
				throw InvalidArgument("--lambda must be a number or 'auto', got '" + lambda + "'");
			}
		}
		if (!haveTriplets && !(cfg.lambda && *cfg.lambda == 0.0))
			throw InvalidArgument("--lambda other than 0 requires --triplets");
		cfg.validate();
		return cfg;
	}
};

template <typename T>
std::vector<T> parseList(const std::string& text, const char* flag) {
	std::vector<T> out;
	for (const auto& field : io::detail::splitFields(text)) {
		std::istringstream in(field);
		T value{};
		if (!(in >> value) || !in.eof())
			throw InvalidArgument(std::string(flag) + ": cannot parse '" + field + "'");
		out.push_back(value);
	}
	return out;
}

/// Writes through @p write to @p path, or to @p out when the path is empty.
template <typename Write>
void emit(const std::string& path, std::ostream& out, Write&& write) {
	if (path.empty()) {
		write(out);
		return;
	}
	auto file = io::detail::openOut(path);
	write(file);
	io::detail::finish(file, path);
}

inline void requireFile(const std::string& path) {
	if (!std::filesystem::exists(path))
		throw Error("file not found: '" + path + "'");
}

/// Reads a selection log: either {"screens": [...]} or a bare array of
/// {"ref": id, "selected": [ids], "shown": [ids]} objects.
inline std::pair<TripletSet, IdIndex> expandScreens(const std::string& path) {
	auto in = io::detail::openIn(path);
	nlohmann::json log = nlohmann::json::parse(in, nullptr, false);
	if (log.is_discarded())
		throw ParseError(path + ": invalid JSON");
	const nlohmann::json& screens = log.is_object() ? log.at("screens") : log;
	if (!screens.is_array())
		throw ParseError(path + ": expected an array of screens");
	std::vector<std::string> names;
	std::unordered_map<std::string, std::size_t> index;
	auto intern = [&](const nlohmann::json& v) {
		if (!v.is_string())
			throw ParseError(path + ": ids must be strings");
		auto [it, inserted] = index.emplace(v.get<std::string>(), names.size());
		if (inserted)
			names.push_back(it->first);
		return it->second;
	};
	TripletSet out;
	for (std::size_t s = 0; s < screens.size(); ++s) {
		const auto& screen = screens[s];
		try {
			const auto ref = intern(screen.at("ref"));
			std::vector<std::size_t> selected, shown;
			for (const auto& v : screen.at("selected"))
				selected.push_back(intern(v));
			for (const auto& v : screen.at("shown"))
				shown.push_back(intern(v));
			auto t = triplets::expandSelection(ref, selected, shown);
			out.insert(out.end(), t.begin(), t.end());
		} catch (const nlohmann::json::exception& e) {
			throw ParseError(path + ": screen " + std::to_string(s) + ": " + e.what());
		} catch (const InvalidArgument& e) {
			throw ParseError(path + ": screen " + std::to_string(s) + ": " + e.what());
		}
	}
	return {std::move(out), IdIndex(std::move(names))};
}

} // namespace detail

/// Runs the frontend on @p args (args[0] is the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
	CLI::App app{"Concept embeddings from a similarity kernel and triplet constraints", "snack"};
	app.require_subcommand(1);

	// kernel
	auto* kernelCmd = app.add_subcommand("kernel", "Build a distance kernel");
	kernelCmd->require_subcommand(1);
	std::string kernelOut;
	std::string featuresPath, tokensPath, vectorsPath;
	auto* euclid = kernelCmd->add_subcommand("euclidean", "Euclidean distances between feature rows");
	euclid->add_option("--features", featuresPath, "features.csv")->required();
	euclid->add_option("--out", kernelOut, "Output kernel.csv (stdout if omitted)");
	auto* assign = kernelCmd->add_subcommand("assignment", "Best-matching kernel over token lists");
	assign->add_option("--tokens", tokensPath, "tokens.csv")->required();
	assign->add_option("--vectors", vectorsPath, "Token vectors, one 'token v1 ... vE' per line")->required();
	assign->add_option("--out", kernelOut, "Output kernel.csv (stdout if omitted)");

	// embed
	auto* embedCmd = app.add_subcommand("embed", "Embed a kernel with optional triplets");
	std::string kernelPath, tripletsPath, embedOut, tracePath;
	detail::EmbedFlags embedFlags;
	embedCmd->add_option("--kernel", kernelPath, "kernel.csv")->required();
	embedCmd->add_option("--triplets", tripletsPath, "triplets.csv");
	embedCmd->add_option("--out", embedOut, "Output embedding.csv (stdout if omitted)");
	embedCmd->add_option("--trace", tracePath, "Output trace.csv");
	embedFlags.add(embedCmd);

	// sample
	auto* sampleCmd = app.add_subcommand("sample", "Generate triplet constraints");
	sampleCmd->require_subcommand(1);
	std::string labelsPath, logPath, sampleOut;
	std::size_t revealN = 0;
	std::optional<std::size_t> cap;
	std::uint64_t sampleSeed = 0;
	auto* sampleLabels = sampleCmd->add_subcommand("labels", "All same/different-label triplets among the first n");
	sampleLabels->add_option("--labels", labelsPath, "labels.csv; its row order defines 'first n'")->required();
	sampleLabels->add_option("--n", revealN, "Number of revealed labels")->required();
	sampleLabels->add_option("--cap", cap, "Keep at most this many triplets, drawn uniformly");
	sampleLabels->add_option("--seed", sampleSeed, "Seed for --cap sampling");
	sampleLabels->add_option("--out", sampleOut, "Output triplets.csv (stdout if omitted)");
	auto* sampleScreens = sampleCmd->add_subcommand("screens", "Expand a selection log into triplets");
	sampleScreens->add_option("--log", logPath, "selections.json")->required();
	sampleScreens->add_option("--out", sampleOut, "Output triplets.csv (stdout if omitted)");

	// eval
	auto* evalCmd = app.add_subcommand("eval", "Score embeddings");
	evalCmd->require_subcommand(1);
	std::string embeddingPath, evalOut, nGrid, lambdaGrid;
	std::size_t seeds = 5;
	double holdout = 0.2;
	detail::EmbedFlags evalFlags;
	auto* tripletError = evalCmd->add_subcommand("triplet-error", "Fraction of violated triplets");
	tripletError->add_option("--embedding", embeddingPath, "embedding.csv")->required();
	tripletError->add_option("--triplets", tripletsPath, "triplets.csv")->required();
	auto* labeling = evalCmd->add_subcommand("labeling", "Labeling accuracy against revealed labels");
	labeling->add_option("--kernel", kernelPath, "kernel.csv")->required();
	labeling->add_option("--labels", labelsPath, "labels.csv")->required();
	labeling->add_option("--n-grid", nGrid, "Comma-separated revealed-label counts")->required();
	labeling->add_option("--seeds", seeds, "Repeats per grid point")->capture_default_str();
	labeling->add_option("--cap", cap, "Cap on triplets per grid point");
	labeling->add_option("--out", evalOut, "Output curve.csv (stdout if omitted)");
	auto* sweep = evalCmd->add_subcommand("lambda-sweep", "Held-out triplet error per lambda");
	sweep->add_option("--kernel", kernelPath, "kernel.csv")->required();
	sweep->add_option("--triplets", tripletsPath, "triplets.csv")->required();
	sweep->add_option("--grid", lambdaGrid, "Comma-separated lambda values")->required();
	sweep->add_option("--holdout", holdout, "Held-out fraction of the triplets")->capture_default_str();
	sweep->add_option("--out", evalOut, "Output sweep.csv (stdout if omitted)");
	for (auto* cmd : {labeling, sweep})
		evalFlags.add(cmd);

	// serve
	auto* serveCmd = app.add_subcommand("serve", "Run the interactive session service");
	int port = 8080;
	std::string host = "127.0.0.1", staticDir, serveFeatures, serveKernel;
	detail::EmbedFlags serveFlags;
	serveCmd->add_option("--port", port, "TCP port")->capture_default_str();
	serveCmd->add_option("--host", host, "Bind address")->capture_default_str();
	serveCmd->add_option("--features", serveFeatures, "features.csv");
	serveCmd->add_option("--kernel", serveKernel, "kernel.csv (takes precedence over --features)");
	serveCmd->add_option("--static-dir", staticDir, "Directory of static UI assets");
	serveFlags.add(serveCmd);

	std::vector<const char*> argv;
	for (const auto& a : args)
		argv.push_back(a.c_str());
	try {
		app.parse(static_cast<int>(argv.size()), argv.data());
	} catch (const CLI::CallForHelp&) {
		out << app.help();
		return 0;
	} catch (const CLI::CallForAllHelp&) {
		out << app.help("", CLI::AppFormatMode::All);
		return 0;
	} catch (const CLI::ParseError& e) {
		err << "usage error: " << e.what() << '\n';
		return kExitError;
	}

	try {
		if (*euclid) {
			detail::requireFile(featuresPath);
			const auto k = kernels::euclideanKernel(io::loadFeatures(featuresPath));
			detail::emit(kernelOut, out, [&](std::ostream& o) { io::writeKernel(o, k); });
		} else if (*assign) {
			detail::requireFile(tokensPath);
			detail::requireFile(vectorsPath);
			const auto table = kernels::loadTokenVectors(vectorsPath);
			const auto k = kernels::assignmentKernel(kernels::loadTokenLists(tokensPath), table);
			detail::emit(kernelOut, out, [&](std::ostream& o) {
				io::writeKernel(o, k.kernel, "shift=" + io::detail::formatNumber(k.shift));
			});
		} else if (*embedCmd) {
			const auto cfg = embedFlags.config(!tripletsPath.empty());
			detail::requireFile(kernelPath);
			const auto k = io::loadKernel(kernelPath);
			TripletSet t;
			if (!tripletsPath.empty()) {
				detail::requireFile(tripletsPath);
				t = io::loadTriplets(tripletsPath, k.index());
			}
			const auto result = optimize::embed(k, t, cfg);
			err << "lambda=" << io::detail::formatNumber(result.lambda) << '\n';
			detail::emit(embedOut, out, [&](std::ostream& o) { io::writeEmbedding(o, result.embedding); });
			if (!tracePath.empty())
				optimize::saveTrace(result.trace, tracePath);
		} else if (*sampleLabels) {
			detail::requireFile(labelsPath);
			const auto table = io::loadLabelTable(labelsPath);
			const auto t = triplets::sampleFromLabels(table.labels, revealN, cap, sampleSeed);
			detail::emit(sampleOut, out, [&](std::ostream& o) { io::writeTriplets(o, t, table.ids); });
		} else if (*sampleScreens) {
			detail::requireFile(logPath);
			const auto [t, ids] = detail::expandScreens(logPath);
			detail::emit(sampleOut, out, [&](std::ostream& o) { io::writeTriplets(o, t, ids); });
		} else if (*tripletError) {
			detail::requireFile(embeddingPath);
			detail::requireFile(tripletsPath);
			const auto y = io::loadEmbedding(embeddingPath);
			const auto t = io::loadTriplets(tripletsPath, y.index());
			out << io::detail::formatNumber(triplets::violationFraction(y, t)) << '\n';
		} else if (*labeling) {
			const auto grid = detail::parseList<std::size_t>(nGrid, "--n-grid");
			const auto cfg = evalFlags.config(true);
			detail::requireFile(kernelPath);
			detail::requireFile(labelsPath);
			const auto k = io::loadKernel(kernelPath);
			const auto labels = io::loadLabels(labelsPath, k.index());
			eval::CurveOptions opts;
			opts.seeds = seeds;
			opts.cap = cap;
			const auto curve = eval::labelingCurve(k, labels, grid, cfg, opts);
			detail::emit(evalOut, out, [&](std::ostream& o) { eval::writeCurve(o, curve); });
		} else if (*sweep) {
			const auto grid = detail::parseList<double>(lambdaGrid, "--grid");
			auto cfg = evalFlags.config(true);
			detail::requireFile(kernelPath);
			detail::requireFile(tripletsPath);
			const auto k = io::loadKernel(kernelPath);
			const auto parts = triplets::split(io::loadTriplets(tripletsPath, k.index()), holdout, cfg.seed);
			const auto p = affinity::affinities(k, cfg.perplexity, cfg.threads);
			const auto y0 = optimize::randomInit(k.size(), cfg.dims, cfg.seed);
			std::ostringstream table;
			table << "lambda,train_error,holdout_error\n";
			for (double lambda : grid) {
				cfg.lambda = lambda;
				const auto result = optimize::embedFrom(p, parts.train, y0, k.ids(), cfg);
				const auto& y = result.embedding.coords();
				table << io::detail::formatNumber(lambda) << ','
					<< (parts.train.empty() ? std::string("nan")
											: io::detail::formatNumber(triplets::violationFraction(y, parts.train)))
					<< ',' << io::detail::formatNumber(triplets::violationFraction(y, parts.test)) << '\n';
			}
			detail::emit(evalOut, out, [&](std::ostream& o) { o << table.str(); });
		} else if (*serveCmd) {
			if (serveFeatures.empty() && serveKernel.empty())
				throw InvalidArgument("serve needs --features or --kernel");
			auto cfg = serveFlags.config(false);
			std::optional<DistanceKernel> k;
			if (!serveKernel.empty()) {
				detail::requireFile(serveKernel);
				k = io::loadKernel(serveKernel);
			} else {
				detail::requireFile(serveFeatures);
				k = kernels::euclideanKernel(io::loadFeatures(serveFeatures));
			}
			std::map<std::string, DistanceKernel> datasets;
			datasets.emplace("default", std::move(*k));
			service::SessionStore store(std::move(datasets), cfg);
			httplib::Server server;
			// Without SO_REUSEPORT so that a port already in use is reported.
			server.set_socket_options([](socket_t sock) {
				int yes = 1;
				setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
			});
			http::mountRoutes(server, store);
			if (!staticDir.empty() && !server.set_mount_point("/", staticDir))
				throw Error("static directory not found: '" + staticDir + "'");
			if (!server.bind_to_port(host, port))
				throw Error("cannot listen on " + host + ":" + std::to_string(port));
			err << "listening on http://" << host << ":" << port << '\n';
			server.listen_after_bind();
		}
	} catch (const std::exception& e) {
		err << "error: " << e.what() << '\n';
		return kExitError;
	}
	return 0;
}

} // namespace snack::cli
