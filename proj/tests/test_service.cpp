#include "support.hpp"

#include <snack/http.hpp>
#include <snack/service.hpp>

#include <gtest/gtest.h>

#include <chrono>
#include <thread>

using namespace snack;
using namespace snack::service;
using nlohmann::json;

namespace {

std::map<std::string, DistanceKernel> fixtureDatasets() {
	const auto blobs = oracle::makeBlobs(4, 25, 3, 8.0, 1);
	std::map<std::string, DistanceKernel> out;
	out.emplace("blobs", DistanceKernel(oracle::makeIds(100), oracle::naiveEuclidean(blobs.points)));
	std::mt19937_64 rng(2);
	out.emplace("small", oracle::randomKernel(12, 3, rng));
	return out;
}

EmbedConfig fastDefaults() {
	EmbedConfig cfg;
	cfg.perplexity = 10.0;
	cfg.total_iters = 60;
	cfg.exaggeration_iters = 20;
	return cfg;
}

std::vector<std::string> names(std::initializer_list<int> idx) {
	std::vector<std::string> out;
	for (int i : idx)
		out.push_back("o" + std::to_string(i));
	return out;
}

template <typename Pred>
bool waitFor(Pred pred, std::chrono::seconds limit = std::chrono::seconds(60)) {
	const auto deadline = std::chrono::steady_clock::now() + limit;
	while (std::chrono::steady_clock::now() < deadline) {
		if (pred())
			return true;
		std::this_thread::sleep_for(std::chrono::milliseconds(5));
	}
	return false;
}

} // namespace

TEST(SessionStore, CreateReturnsFirstRevision) {
	SessionStore store(fixtureDatasets(), fastDefaults());
	const auto a = store.create("blobs");
	EXPECT_EQ(a.revision, 1u);
	EXPECT_EQ(a.coords.rows(), 100);
	EXPECT_EQ(a.coords.cols(), 2);
	EXPECT_EQ(a.status, Status::Idle);
	EXPECT_EQ(a.triplet_count, 0u);
	const auto b = store.create("blobs");
	EXPECT_NE(a.id, b.id);
	store.submitSelection(a.id, "o0", names({1}), names({1, 2}));
	EXPECT_EQ(store.state(a.id).triplet_count, 1u);
	EXPECT_EQ(store.state(b.id).triplet_count, 0u);
}

TEST(SessionStore, CreateErrors) {
	SessionStore store(fixtureDatasets(), fastDefaults());
	EXPECT_THROW(store.create("nope"), NotFound);
	ConfigPatch patch;
	patch.perplexity = 12.0;
	EXPECT_THROW(store.create("small", patch), InvalidArgument);
	EXPECT_THROW(store.state("missing"), NotFound);
}

TEST(SessionStore, SelectionsAccumulateScreenArithmetic) {
	SessionStore store(fixtureDatasets(), fastDefaults());
	const auto s = store.create("blobs");
	const auto shown = names({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
	EXPECT_EQ(store.submitSelection(s.id, "o0", names({1, 2, 3, 4}), shown), 32u);
	EXPECT_EQ(store.submitSelection(s.id, "o50", shown, shown), 0u);
	EXPECT_EQ(store.submitSelection(s.id, "o13", names({2, 3}), names({2, 3, 4})), 2u);
	EXPECT_EQ(store.state(s.id).triplet_count, 34u);
	EXPECT_THROW(store.submitSelection(s.id, "o0", names({99}), names({1})), InvalidArgument);
	EXPECT_THROW(store.submitSelection(s.id, "zz", names({1}), names({1})), InvalidArgument);
	EXPECT_THROW(store.submitSelection("missing", "o0", names({1}), names({1})), NotFound);
}

TEST(SessionStore, ReembedIncrementsRevisionAndUsesTriplets) {
	SessionStore store(fixtureDatasets(), fastDefaults());
	const auto s = store.create("blobs");
	const auto same = store.reembed(s.id);
	EXPECT_EQ(same.revision, 2u);
	EXPECT_EQ(same.lambda, 0.0);

	store.submitSelection(s.id, "o0", names({1, 2, 3, 4}), names({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
	const auto next = store.reembed(s.id);
	EXPECT_EQ(next.revision, 3u);
	EXPECT_GT(next.lambda, 0.0);
	EXPECT_LT(next.lambda, 1.0);
	EXPECT_FALSE(next.coords == same.coords);

	ConfigPatch fixed;
	fixed.lambda = 0.25;
	EXPECT_EQ(store.reembed(s.id, fixed).lambda, 0.25);
	EXPECT_EQ(store.reembed(s.id).lambda, 0.25);
}

TEST(SessionStore, ReembedIsDeterministicPerSessionHistory) {
	SessionStore a(fixtureDatasets(), fastDefaults());
	SessionStore b(fixtureDatasets(), fastDefaults());
	const auto sa = a.create("blobs");
	const auto sb = b.create("blobs");
	for (auto* store : {&a, &b})
		store->submitSelection(store == &a ? sa.id : sb.id, "o3", names({5, 6}), names({5, 6, 7, 8}));
	EXPECT_TRUE(a.reembed(sa.id).coords == b.reembed(sb.id).coords);
}

TEST(SessionStore, BusySessionRejectsWritesAndServesLastRevision) {
	auto cfg = fastDefaults();
	cfg.total_iters = 4000;
	SessionStore store(fixtureDatasets(), cfg);
	ConfigPatch quick;
	quick.total_iters = 30;
	const auto s = store.create("blobs", quick);
	const auto before = store.state(s.id);
	const auto started = store.reembedAsync(s.id);
	EXPECT_EQ(started.revision, 1u);

	const auto during = store.state(s.id);
	EXPECT_EQ(during.status, Status::Embedding);
	EXPECT_EQ(during.revision, 1u);
	EXPECT_TRUE(during.coords == before.coords);
	EXPECT_THROW(store.reembed(s.id), Conflict);
	EXPECT_THROW(store.submitSelection(s.id, "o0", names({1}), names({1, 2})), Conflict);

	ASSERT_TRUE(waitFor([&] { return store.state(s.id).status == Status::Idle; }));
	const auto after = store.state(s.id);
	EXPECT_EQ(after.revision, 2u);
	EXPECT_FALSE(after.coords == before.coords);
}

TEST(SessionStore, FailedReembedReportsError) {
	SessionStore store(fixtureDatasets(), fastDefaults());
	const auto s = store.create("small", [] {
		ConfigPatch p;
		p.perplexity = 3.0;
		return p;
	}());
	ConfigPatch bad;
	bad.perplexity = 50.0;
	EXPECT_THROW(store.reembed(s.id, bad), InvalidArgument);
	EXPECT_EQ(store.state(s.id).status, Status::Idle);
}

TEST(SessionStore, ExportRoundTrips) {
	SessionStore store(fixtureDatasets(), fastDefaults());
	const auto s = store.create("blobs");
	store.submitSelection(s.id, "o7", names({8}), names({8, 9}));
	const auto out = store.exportSession(s.id);
	EXPECT_EQ(out.triplets_csv, "i,j,k\no7,o8,o9\n");
	std::istringstream in(out.embedding_csv);
	const auto y = io::readEmbedding(in);
	EXPECT_TRUE(y.coords() == store.state(s.id).coords);
}

TEST(SessionStore, ManyTripletsReembed) {
	auto cfg = fastDefaults();
	cfg.total_iters = 20;
	SessionStore store(fixtureDatasets(), cfg);
	const auto s = store.create("blobs");
	std::vector<std::string> shown = names({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20});
	std::vector<std::string> selected(shown.begin(), shown.begin() + 10);
	std::size_t total = 0;
	for (int screen = 0; total < 20000; ++screen)
		total += store.submitSelection(s.id, "o" + std::to_string(21 + screen % 79), selected, shown);
	EXPECT_EQ(total, 20000u);
	EXPECT_EQ(store.state(s.id).triplet_count, 20000u);
	EXPECT_EQ(store.reembed(s.id).revision, 2u);
}

class HttpService : public ::testing::Test {
protected:
	void SetUp() override {
		auto cfg = fastDefaults();
		store_ = std::make_unique<SessionStore>(fixtureDatasets(), cfg);
		http::mountRoutes(server_, *store_);
		port_ = server_.bind_to_any_port("127.0.0.1");
		ASSERT_GT(port_, 0);
		thread_ = std::thread([this] { server_.listen_after_bind(); });
		server_.wait_until_ready();
		client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
	}

	void TearDown() override {
		server_.stop();
		thread_.join();
	}

	httplib::Result post(const std::string& path, const json& body) {
		return client_->Post(path, body.dump(), "application/json");
	}

	std::unique_ptr<SessionStore> store_;
	httplib::Server server_;
	int port_ = 0;
	std::thread thread_;
	std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpService, HealthAndDatasets) {
	auto res = client_->Get("/health");
	ASSERT_TRUE(res);
	EXPECT_EQ(res->status, 200);
	EXPECT_EQ(res->body, "ok");
	res = client_->Get("/datasets");
	EXPECT_EQ(json::parse(res->body)["datasets"], json({"blobs", "small"}));
}

TEST_F(HttpService, FullRefinementLoop) {
	auto res = post("/sessions", {{"dataset", "blobs"}, {"lambda", "auto"}});
	ASSERT_TRUE(res);
	ASSERT_EQ(res->status, 201) << res->body;
	auto created = json::parse(res->body);
	const std::string id = created["id"];
	EXPECT_EQ(created["revision"], 1);
	EXPECT_EQ(created["coords"].size(), 100u);
	EXPECT_EQ(created["coords"][0].size(), 2u);
	EXPECT_EQ(created["status"], "idle");
	EXPECT_EQ(created["tripletCount"], 0);

	res = post("/sessions/" + id + "/selections",
		{{"ref", "o0"}, {"selected", names({1, 2, 3, 4})},
			{"shown", names({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12})}});
	ASSERT_EQ(res->status, 200) << res->body;
	EXPECT_EQ(json::parse(res->body)["added"], 32);
	EXPECT_EQ(json::parse(res->body)["tripletCount"], 32);

	res = post("/sessions/" + id + "/reembed", json::object());
	ASSERT_EQ(res->status, 200) << res->body;
	EXPECT_EQ(json::parse(res->body)["revision"], 2);

	res = client_->Get("/sessions/" + id);
	EXPECT_EQ(json::parse(res->body)["revision"], 2);
	EXPECT_EQ(json::parse(res->body)["tripletCount"], 32);

	res = client_->Get("/sessions/" + id + "/export");
	ASSERT_EQ(res->status, 200);
	const auto exported = json::parse(res->body);
	const std::string csv = exported["triplets"];
	EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 33);
}

TEST_F(HttpService, AsyncReembedConflicts) {
	auto res = post("/sessions", {{"dataset", "blobs"}});
	const std::string id = json::parse(res->body)["id"];
	res = post("/sessions/" + id + "/reembed", {{"wait", false}, {"iters", 4000}});
	ASSERT_EQ(res->status, 202) << res->body;
	res = post("/sessions/" + id + "/reembed", json::object());
	EXPECT_EQ(res->status, 409);
	EXPECT_TRUE(json::parse(res->body).contains("error"));
	res = client_->Get("/sessions/" + id);
	EXPECT_EQ(json::parse(res->body)["status"], "embedding");
	EXPECT_EQ(json::parse(res->body)["revision"], 1);
	ASSERT_TRUE(waitFor([&] { return json::parse(client_->Get("/sessions/" + id)->body)["status"] == "idle"; }));
	EXPECT_EQ(json::parse(client_->Get("/sessions/" + id)->body)["revision"], 2);
}

TEST_F(HttpService, ErrorStatuses) {
	auto res = client_->Get("/sessions/none");
	EXPECT_EQ(res->status, 404);
	EXPECT_TRUE(json::parse(res->body).contains("error"));
	res = post("/sessions", {{"dataset", "nope"}});
	EXPECT_EQ(res->status, 404);
	res = post("/sessions", {{"dataset", "small"}, {"perplexity", 30}});
	EXPECT_EQ(res->status, 400);
	EXPECT_NE(json::parse(res->body)["error"].get<std::string>().find("perplexity"), std::string::npos);
	res = client_->Post("/sessions", "{not json", "application/json");
	EXPECT_EQ(res->status, 400);
	res = post("/sessions", {{"dataset", "small"}, {"perplexity", 3}, {"lambda", "maybe"}});
	EXPECT_EQ(res->status, 400);
	const std::string id = json::parse(post("/sessions", {{"dataset", "small"}, {"perplexity", 3}})->body)["id"];
	res = post("/sessions/" + id + "/selections", {{"ref", "o0"}, {"selected", names({1})}, {"shown", names({2})}});
	EXPECT_EQ(res->status, 400);
	res = post("/sessions/" + id + "/selections", {{"ref", "o0"}});
	EXPECT_EQ(res->status, 400);
}
