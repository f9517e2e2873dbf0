#include "support.hpp"

#include <snack/assignment.hpp>
#include <snack/kernels.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace snack;
using namespace snack::kernels;

namespace {

TokenEmbeddingTable randomTable(std::size_t tokens, std::size_t dims, std::mt19937_64& rng) {
	TokenEmbeddingTable table(dims);
	for (std::size_t t = 0; t < tokens; ++t)
		table.add("t" + std::to_string(t), oracle::randomMatrix(1, dims, rng).row(0).transpose());
	return table;
}

TokenList randomList(std::size_t tokens, std::size_t maxLen, std::mt19937_64& rng) {
	std::uniform_int_distribution<std::size_t> len(1, maxLen), pick(0, tokens - 1);
	TokenList list(len(rng));
	for (auto& t : list)
		t = "t" + std::to_string(pick(rng));
	return list;
}

double greedyMatching(Matrix w) {
	double total = 0.0;
	const auto steps = std::min(w.rows(), w.cols());
	for (Eigen::Index s = 0; s < steps; ++s) {
		Eigen::Index r, c;
		total += w.maxCoeff(&r, &c);
		w.row(r).setConstant(-std::numeric_limits<double>::infinity());
		w.col(c).setConstant(-std::numeric_limits<double>::infinity());
	}
	return total;
}

} // namespace

TEST(Euclidean, ThreeFourFive) {
	Matrix x(2, 2);
	x << 0, 0, 3, 4;
	const auto k = euclideanKernel(FeatureMatrix({"a", "b"}, x));
	EXPECT_EQ(k(0, 1), 5.0);
	EXPECT_EQ(k(1, 0), 5.0);
	EXPECT_EQ(k(0, 0), 0.0);
}

TEST(Euclidean, MatchesNaiveLoop) {
	std::mt19937_64 rng(1);
	for (int trial = 0; trial < 10; ++trial) {
		const Matrix x = oracle::randomMatrix(25, 6, rng, 3.0);
		const auto k = euclideanKernel(FeatureMatrix(oracle::makeIds(25), x));
		EXPECT_LT((k.dist() - oracle::naiveEuclidean(x)).cwiseAbs().maxCoeff(), 1e-12);
	}
}

TEST(Euclidean, SatisfiesTriangleInequality) {
	std::mt19937_64 rng(2);
	const auto k = euclideanKernel(FeatureMatrix(oracle::makeIds(20), oracle::randomMatrix(20, 3, rng)));
	for (std::size_t i = 0; i < 20; ++i)
		for (std::size_t j = 0; j < 20; ++j)
			for (std::size_t l = 0; l < 20; ++l)
				EXPECT_LE(k(i, l), k(i, j) + k(j, l) + 1e-12);
}

TEST(Hungarian, HandExample) {
	Matrix c(3, 3);
	c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
	const auto m = assignment::minCostAssignment(c);
	EXPECT_EQ(m.total, 5.0);
	EXPECT_EQ(m.column, (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Hungarian, MatchesExhaustiveSearch) {
	std::mt19937_64 rng(3);
	std::uniform_int_distribution<int> size(1, 6);
	for (int trial = 0; trial < 300; ++trial) {
		const Matrix w = oracle::randomMatrix(static_cast<std::size_t>(size(rng)), static_cast<std::size_t>(size(rng)), rng);
		const double exact = assignment::maxWeightMatching(w);
		EXPECT_NEAR(exact, oracle::bruteForceMatching(w), 1e-12);
		EXPECT_GE(exact, greedyMatching(w) - 1e-12);
	}
}

TEST(Hungarian, AssignmentIsInjective) {
	std::mt19937_64 rng(4);
	const Matrix c = oracle::randomMatrix(4, 7, rng);
	const auto m = assignment::minCostAssignment(c);
	std::set<std::size_t> cols(m.column.begin(), m.column.end());
	EXPECT_EQ(cols.size(), 4u);
	EXPECT_THROW(assignment::minCostAssignment(Matrix(c.transpose())), InvalidArgument);
}

TEST(AssignmentSimilarity, SymmetricAndSelfMatchIsLength) {
	std::mt19937_64 rng(5);
	const auto table = randomTable(12, 5, rng);
	for (int trial = 0; trial < 50; ++trial) {
		const auto a = randomList(12, 6, rng), b = randomList(12, 6, rng);
		EXPECT_NEAR(assignmentSimilarity(a, b, table), assignmentSimilarity(b, a, table), 1e-12);
	}
	TokenList distinct{"t0", "t1", "t2"};
	EXPECT_LE(assignmentSimilarity(distinct, distinct, table), 3.0 + 1e-12);
	EXPECT_GE(assignmentSimilarity(distinct, distinct, table), 3.0 - 1e-12);
}

TEST(AssignmentKernel, ThreeListOracle) {
	// Orthonormal tokens make every similarity a count of shared tokens.
	TokenEmbeddingTable table(3);
	table.add("salt", Vector::Unit(3, 0));
	table.add("Sugar", Vector::Unit(3, 1));
	table.add("egg", Vector::Unit(3, 2) * 4.0);
	const TokenListCollection lists{{"a", "b", "c"}, {{"salt", "sugar"}, {"salt", "egg"}, {"egg"}}};
	const auto ak = assignmentKernel(lists, table);
	// similarities: ab = 1, ac = 0, bc = 1 -> raw -1, 0, -1 -> shift -1.
	EXPECT_EQ(ak.shift, -1.0);
	EXPECT_EQ(ak.kernel(0, 1), 0.0);
	EXPECT_EQ(ak.kernel(0, 2), 1.0);
	EXPECT_EQ(ak.kernel(1, 2), 0.0);
	EXPECT_NO_THROW(DistanceKernel::validate(ak.kernel.dist()));
}

TEST(AssignmentKernel, RandomListsGiveValidKernel) {
	std::mt19937_64 rng(6);
	const auto table = randomTable(20, 4, rng);
	TokenListCollection lists;
	for (std::size_t i = 0; i < 15; ++i) {
		lists.ids.push_back("r" + std::to_string(i));
		lists.lists.push_back(randomList(20, 6, rng));
	}
	const auto a = assignmentKernel(lists, table, 1);
	const auto b = assignmentKernel(lists, table, 3);
	EXPECT_TRUE(a.kernel.dist() == b.kernel.dist());
	EXPECT_NO_THROW(DistanceKernel::validate(a.kernel.dist()));
	EXPECT_EQ(a.kernel.dist().minCoeff(), 0.0);
}

TEST(AssignmentKernel, SingleObjectAndUnknownToken) {
	TokenEmbeddingTable table(2);
	table.add("a", Vector::Unit(2, 0));
	const auto one = assignmentKernel({{"x"}, {{"a"}}}, table);
	EXPECT_EQ(one.kernel.size(), 1u);
	EXPECT_EQ(one.shift, 0.0);
	EXPECT_THROW(assignmentKernel({{"x", "y"}, {{"a"}, {"zzz"}}}, table), InvalidArgument);
}

TEST(TokenFiles, ParseVectorsAndLists) {
	std::istringstream vec("# comment\nSalt 1 0\nsugar 0 2\n");
	const auto table = readTokenVectors(vec);
	EXPECT_EQ(table.size(), 2u);
	EXPECT_DOUBLE_EQ(table.at("SUGAR")(1), 1.0);
	std::istringstream lists("id,tokens\nr1, Salt ;sugar\nr2,salt\n");
	const auto c = readTokenLists(lists);
	EXPECT_EQ(c.ids, (std::vector<std::string>{"r1", "r2"}));
	EXPECT_EQ(c.lists[0], (TokenList{"salt", "sugar"}));
	std::istringstream dup("r1,salt\nr1,sugar\n");
	EXPECT_THROW(readTokenLists(dup), ParseError);
	std::istringstream ragged("a 1 0\nb 1\n");
	EXPECT_THROW(readTokenVectors(ragged), ParseError);
}
