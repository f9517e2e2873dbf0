/// @file  http.hpp
/// @brief JSON-over-HTTP binding of the session store.
///
/// Endpoints:
///   GET  /health                     -> 200 "ok"
///   GET  /datasets                   -> {"datasets": [...]}
///   POST /sessions                   -> create; body {"dataset", config fields}
///   GET  /sessions/{id}              -> current snapshot
///   POST /sessions/{id}/selections   -> {"ref", "selected", "shown"}
///   POST /sessions/{id}/reembed      -> optional config fields, "wait" (default true)
///   GET  /sessions/{id}/export       -> {"triplets": csv, "embedding": csv}
/// Errors carry {"error": message} with 400, 404, 409 or 500.

#pragma once

#include <snack/service.hpp>

#include <httplib.h>
#include <json.hpp>

#include <string>

namespace snack::http {

using nlohmann::json;

inline json toJson(const service::Snapshot& s) {
	json coords = json::array();
	for (Eigen::Index r = 0; r < s.coords.rows(); ++r) {
		json row = json::array();
		for (Eigen::Index c = 0; c < s.coords.cols(); ++c)
			row.push_back(s.coords(r, c));
		coords.push_back(std::move(row));
	}
	json out = {
		{"id", s.id},
		{"ids", s.ids},
		{"coords", std::move(coords)},
		{"revision", s.revision},
		{"status", service::toString(s.status)},
		{"tripletCount", s.triplet_count},
		{"lambda", s.lambda},
	};
	if (!s.error.empty())
		out["message"] = s.error;
	return out;
}

/// Reads the optional config fields of a request body.
inline service::ConfigPatch patchFromJson(const json& body) {
	service::ConfigPatch patch;
	auto number = [&](const char* key) -> std::optional<double> {
		if (!body.contains(key) || body[key].is_null())
			return std::nullopt;
		if (!body[key].is_number())
			throw InvalidArgument(std::string("field '") + key + "' must be a number");
		return body[key].get<double>();
	};
	auto count = [&](const char* key) -> std::optional<std::size_t> {
		if (!body.contains(key) || body[key].is_null())
			return std::nullopt;
		if (!body[key].is_number_unsigned())
			throw InvalidArgument(std::string("field '") + key + "' must be a non-negative integer");
		return body[key].get<std::size_t>();
	};
	if (body.contains("lambda") && body["lambda"].is_string()) {
		if (body["lambda"] != "auto")
			throw InvalidArgument("field 'lambda' must be a number or \"auto\"");
	} else {
		patch.lambda = number("lambda");
	}
	patch.alpha = number("alpha");
	patch.perplexity = number("perplexity");
	patch.total_iters = count("iters");
	patch.exaggeration_iters = count("exaggerationIters");
	if (auto seed = count("seed"))
		patch.seed = *seed;
	return patch;
}

namespace detail {

inline void reply(httplib::Response& res, int status, const json& body) {
	res.status = status;
	res.set_content(body.dump(), "application/json");
}

inline json parseBody(const httplib::Request& req) {
	if (req.body.empty())
		return json::object();
	auto body = json::parse(req.body, nullptr, false);
	if (body.is_discarded() || !body.is_object())
		throw InvalidArgument("request body must be a JSON object");
	return body;
}

inline std::vector<std::string> stringList(const json& body, const char* key) {
	if (!body.contains(key) || !body[key].is_array())
		throw InvalidArgument(std::string("field '") + key + "' must be an array of ids");
	std::vector<std::string> out;
	for (const auto& v : body[key]) {
		if (!v.is_string())
			throw InvalidArgument(std::string("field '") + key + "' must contain only string ids");
		out.push_back(v.get<std::string>());
	}
	return out;
}

/// Runs @p body, translating library errors into status codes.
template <typename Body>
void guarded(httplib::Response& res, Body&& body) {
	try {
		body();
	} catch (const service::NotFound& e) {
		reply(res, 404, {{"error", e.what()}});
	} catch (const service::Conflict& e) {
		reply(res, 409, {{"error", e.what()}});
	} catch (const InvalidArgument& e) {
		reply(res, 400, {{"error", e.what()}});
	} catch (const json::exception& e) {
		reply(res, 400, {{"error", e.what()}});
	} catch (const std::exception& e) {
		reply(res, 500, {{"error", e.what()}});
	}
}

} // namespace detail

/// Registers every endpoint on @p server. The store must outlive the server.
inline void mountRoutes(httplib::Server& server, service::SessionStore& store) {
	using detail::guarded;
	using detail::reply;

	server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
		res.set_content("ok", "text/plain");
	});

	server.Get("/datasets", [&store](const httplib::Request&, httplib::Response& res) {
		reply(res, 200, {{"datasets", store.datasets()}});
	});

	server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const auto body = detail::parseBody(req);
			std::string dataset = body.value("dataset", std::string());
			if (dataset.empty())
				dataset = store.datasets().front();
			reply(res, 201, toJson(store.create(dataset, patchFromJson(body))));
		});
	});

	server.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] { reply(res, 200, toJson(store.state(req.matches[1]))); });
	});

	server.Post(R"(/sessions/([^/]+)/selections)", [&store](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const auto body = detail::parseBody(req);
			if (!body.contains("ref") || !body["ref"].is_string())
				throw InvalidArgument("field 'ref' must be a string id");
			const std::string id = req.matches[1];
			const auto added = store.submitSelection(id, body["ref"].get<std::string>(),
				detail::stringList(body, "selected"), detail::stringList(body, "shown"));
			reply(res, 200, {{"added", added}, {"tripletCount", store.state(id).triplet_count}});
		});
	});

	server.Post(R"(/sessions/([^/]+)/reembed)", [&store](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const auto body = detail::parseBody(req);
			const bool wait = body.value("wait", true);
			const std::string id = req.matches[1];
			if (wait)
				reply(res, 200, toJson(store.reembed(id, patchFromJson(body))));
			else
				reply(res, 202, toJson(store.reembedAsync(id, patchFromJson(body))));
		});
	});

	server.Get(R"(/sessions/([^/]+)/export)", [&store](const httplib::Request& req, httplib::Response& res) {
		guarded(res, [&] {
			const auto out = store.exportSession(req.matches[1]);
			reply(res, 200, {{"triplets", out.triplets_csv}, {"embedding", out.embedding_csv}});
		});
	});
}

} // namespace snack::http
