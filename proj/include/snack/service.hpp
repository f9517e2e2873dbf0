/// @file  service.hpp
/// @brief In-memory refinement sessions: hold a dataset, collect selections,
/// re-embed on demand and serve consistent snapshots.
///
/// Each session owns its triplets and its latest completed embedding.
/// Readers always see the last completed revision; a re-embed works on
/// private copies and publishes the result atomically when it finishes.

#pragma once

#include <snack/affinity.hpp>
#include <snack/core.hpp>
#include <snack/io.hpp>
#include <snack/optimize.hpp>
#include <snack/triplets.hpp>

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace snack::service {

/// Unknown session or dataset.
class NotFound : public Error {
public:
	using Error::Error;
};

/// The session is busy re-embedding.
class Conflict : public Error {
public:
	using Error::Error;
};

/// Standard deviation of the jitter added to warm-start coordinates.
inline constexpr double kWarmStartJitter = 1e-6;

enum class Status { Idle, Embedding, Error };

inline const char* toString(Status s) {
	switch (s) {
	case Status::Idle:
		return "idle";
	case Status::Embedding:
		return "embedding";
	case Status::Error:
		return "error";
	}
	return "unknown";
}

/// Partial configuration supplied by a client.
struct ConfigPatch {
	std::optional<double> lambda;
	std::optional<double> alpha;
	std::optional<double> perplexity;
	std::optional<std::size_t> total_iters;
	std::optional<std::size_t> exaggeration_iters;
	std::optional<std::uint64_t> seed;

	void applyTo(EmbedConfig& cfg) const {
		if (alpha)
			cfg.alpha = *alpha;
		if (perplexity)
			cfg.perplexity = *perplexity;
		if (total_iters)
			cfg.total_iters = *total_iters;
		if (exaggeration_iters)
			cfg.exaggeration_iters = *exaggeration_iters;
		if (seed)
			cfg.seed = *seed;
	}
};

/// Read-only view of a session at one revision.
struct Snapshot {
	std::string id;
	std::vector<std::string> ids;
	Matrix coords;
	std::uint64_t revision = 0;
	Status status = Status::Idle;
	std::size_t triplet_count = 0;
	double lambda = 0.0;
	std::string error;
};

struct Export {
	std::string triplets_csv;
	std::string embedding_csv;
};

class SessionStore {
public:
	explicit SessionStore(std::map<std::string, DistanceKernel> datasets, EmbedConfig defaults = {})
		: datasets_(std::move(datasets)), defaults_(defaults) {
		if (datasets_.empty())
			throw InvalidArgument("the service needs at least one dataset");
		defaults_.validate();
	}

	~SessionStore() {
		std::vector<std::thread> workers;
		{
			std::lock_guard lock(workersMutex_);
			workers.swap(workers_);
		}
		for (auto& w : workers)
			w.join();
	}

	SessionStore(const SessionStore&) = delete;
	SessionStore& operator=(const SessionStore&) = delete;

	std::vector<std::string> datasets() const {
		std::vector<std::string> names;
		for (const auto& [name, k] : datasets_)
			names.push_back(name);
		return names;
	}

	/// Calibrates affinities and runs the initial (triplet-free) embedding.
	Snapshot create(const std::string& dataset, const ConfigPatch& patch = {}) {
		auto it = datasets_.find(dataset);
		if (it == datasets_.end())
			throw NotFound("unknown dataset '" + dataset + "'");
		const DistanceKernel& kernel = it->second;
		EmbedConfig cfg = defaults_;
		patch.applyTo(cfg);
		cfg.lambda = 0.0;
		cfg.validate();
		if (!(cfg.perplexity < static_cast<double>(kernel.size())))
			throw InvalidArgument("perplexity " + std::to_string(cfg.perplexity) + " must be below N = " +
				std::to_string(kernel.size()));

		auto session = std::make_shared<Session>();
		session->kernel = &kernel;
		session->config = cfg;
		session->lambdaOverride = patch.lambda;
		session->affinities = std::make_shared<affinity::AffinityMatrix>(
			affinity::affinities(kernel, cfg.perplexity, cfg.threads));
		auto result = optimize::embedFrom(*session->affinities, {},
			optimize::randomInit(kernel.size(), cfg.dims, cfg.seed), kernel.ids(), cfg);
		session->coords = result.embedding.coords();
		session->lambda = result.lambda;
		session->revision = 1;

		std::unique_lock lock(sessionsMutex_);
		session->id = "s" + std::to_string(++nextId_);
		sessions_.emplace(session->id, session);
		std::lock_guard sl(session->mutex);
		return snapshotLocked(*session);
	}

	Snapshot state(const std::string& id) const {
		auto s = find(id);
		std::lock_guard lock(s->mutex);
		return snapshotLocked(*s);
	}

	/// Appends the triplets implied by one selection screen; returns how many.
	std::size_t submitSelection(const std::string& id, const std::string& ref, const std::vector<std::string>& selected,
		const std::vector<std::string>& shown) {
		auto s = find(id);
		const IdIndex& index = s->kernel->index();
		auto resolve = [&](const std::string& name) {
			auto i = index.find(name);
			if (!i)
				throw InvalidArgument("unknown object id '" + name + "'");
			return *i;
		};
		const std::size_t refIndex = resolve(ref);
		std::vector<std::size_t> sel, grid;
		for (const auto& name : selected)
			sel.push_back(resolve(name));
		for (const auto& name : shown)
			grid.push_back(resolve(name));
		auto added = triplets::expandSelection(refIndex, sel, grid);
		std::lock_guard lock(s->mutex);
		if (s->status == Status::Embedding)
			throw Conflict("session '" + id + "' is re-embedding");
		s->triplets.insert(s->triplets.end(), added.begin(), added.end());
		return added.size();
	}

	/// Warm-started re-optimization; blocks until the new revision is published.
	Snapshot reembed(const std::string& id, const ConfigPatch& patch = {}) {
		auto s = find(id);
		auto job = claim(*s, patch);
		run(*s, std::move(job));
		std::lock_guard lock(s->mutex);
		if (s->status == Status::Error)
			throw Error(s->error);
		return snapshotLocked(*s);
	}

	/// Starts a re-embed on a background thread and returns the pre-embed snapshot.
	Snapshot reembedAsync(const std::string& id, const ConfigPatch& patch = {}) {
		auto s = find(id);
		auto job = claim(*s, patch);
		Snapshot before;
		{
			std::lock_guard lock(s->mutex);
			before = snapshotLocked(*s);
		}
		std::lock_guard lock(workersMutex_);
		workers_.emplace_back([this, s, job = std::move(job)]() mutable { run(*s, std::move(job)); });
		return before;
	}

	Export exportSession(const std::string& id) const {
		auto s = find(id);
		TripletSet trips;
		Matrix coords;
		{
			std::lock_guard lock(s->mutex);
			trips = s->triplets;
			coords = s->coords;
		}
		Export out;
		std::ostringstream t, e;
		io::writeTriplets(t, trips, s->kernel->index());
		io::writeEmbedding(e, Embedding(s->kernel->ids(), std::move(coords)));
		out.triplets_csv = t.str();
		out.embedding_csv = e.str();
		return out;
	}

private:
	struct Session {
		std::string id;
		const DistanceKernel* kernel = nullptr;
		mutable std::mutex mutex;
		std::shared_ptr<const affinity::AffinityMatrix> affinities;
		EmbedConfig config;
		std::optional<double> lambdaOverride;
		TripletSet triplets;
		Matrix coords;
		double lambda = 0.0;
		std::uint64_t revision = 0;
		Status status = Status::Idle;
		std::string error;
	};

	/// Private inputs of one re-embed, copied while holding the session lock.
	struct Job {
		std::shared_ptr<const affinity::AffinityMatrix> affinities;
		bool recalibrate = false;
		EmbedConfig config;
		TripletSet triplets;
		Matrix start;
	};

	std::shared_ptr<Session> find(const std::string& id) const {
		std::shared_lock lock(sessionsMutex_);
		auto it = sessions_.find(id);
		if (it == sessions_.end())
			throw NotFound("unknown session '" + id + "'");
		return it->second;
	}

	Snapshot snapshotLocked(const Session& s) const {
		Snapshot out;
		out.id = s.id;
		out.ids = s.kernel->ids();
		out.coords = s.coords;
		out.revision = s.revision;
		out.status = s.status;
		out.triplet_count = s.triplets.size();
		out.lambda = s.lambda;
		out.error = s.error;
		return out;
	}

	Job claim(Session& s, const ConfigPatch& patch) {
		std::lock_guard lock(s.mutex);
		if (s.status == Status::Embedding)
			throw Conflict("session '" + s.id + "' is already re-embedding");
		Job job;
		job.config = s.config;
		patch.applyTo(job.config);
		if (patch.lambda)
			s.lambdaOverride = patch.lambda;
		job.config.lambda = s.lambdaOverride;
		if (s.triplets.empty())
			job.config.lambda = 0.0;
		job.config.validate();
		if (!(job.config.perplexity < static_cast<double>(s.kernel->size())))
			throw InvalidArgument("perplexity must be below N");
		job.recalibrate = job.config.perplexity != s.config.perplexity;
		job.affinities = s.affinities;
		job.triplets = s.triplets;
		std::mt19937_64 rng(job.config.seed ^ (0x9e3779b97f4a7c15ULL * (s.revision + 1)));
		std::normal_distribution<double> jitter(0.0, kWarmStartJitter);
		job.start = s.coords;
		for (Eigen::Index i = 0; i < job.start.size(); ++i)
			job.start.data()[i] += jitter(rng);
		s.status = Status::Embedding;
		s.error.clear();
		return job;
	}

	void run(Session& s, Job job) {
		try {
			if (job.recalibrate)
				job.affinities = std::make_shared<affinity::AffinityMatrix>(
					affinity::affinities(*s.kernel, job.config.perplexity, job.config.threads));
			auto result = optimize::embedFrom(*job.affinities, job.triplets, std::move(job.start), s.kernel->ids(),
				job.config);
			std::lock_guard lock(s.mutex);
			s.coords = result.embedding.coords();
			s.lambda = result.lambda;
			s.affinities = job.affinities;
			s.config.perplexity = job.config.perplexity;
			s.config.alpha = job.config.alpha;
			++s.revision;
			s.status = Status::Idle;
		} catch (const std::exception& e) {
			std::lock_guard lock(s.mutex);
			s.status = Status::Error;
			s.error = e.what();
		}
	}

	std::map<std::string, DistanceKernel> datasets_;
	EmbedConfig defaults_;
	mutable std::shared_mutex sessionsMutex_;
	std::map<std::string, std::shared_ptr<Session>> sessions_;
	std::uint64_t nextId_ = 0;
	std::mutex workersMutex_;
	std::vector<std::thread> workers_;
};

} // namespace snack::service
