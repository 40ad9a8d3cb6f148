#include "scd/engine.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace scd;

namespace {

ExperimentConfig small_world(std::uint64_t seed, int held_out = 3, double separation = 8.0) {
    ExperimentConfig cfg;
    cfg.data.kind = DataSource::Kind::gaussian;
    cfg.data.gaussian = {6, 8, separation, 60, 11};
    for (int c = 6 - held_out; c < 6; ++c) cfg.split.held_out_classes.insert(c);
    cfg.hidden_dims = {32};
    cfg.kmeans.k = held_out;
    cfg.kmeans.restarts = 4;
    cfg.learnability.epochs = 5;
    cfg.epochs_initial = 3;
    cfg.epochs_per_round = 2;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(Static, SeparableWorldReconstructsAlmostPerfectly) {
    const auto r = run_static(small_world(1));
    EXPECT_GE(r.report.dra, 0.95);
    EXPECT_EQ(r.state.stop_reason, "static");
    EXPECT_TRUE(r.state.dataset.unlabeled_indices().empty());
}

TEST(Static, ZeroHeldOutClassesIsAnError) {
    EXPECT_THROW(run_static(small_world(1, 0)), InvalidArgument);
}

TEST(Static, UntrainedRunsAreBitIdentical) {
    auto cfg = small_world(5);
    cfg.epochs_initial = 0;
    const auto a = run_static(cfg);
    const auto b = run_static(cfg);
    EXPECT_EQ(a.report.dra, b.report.dra);
    EXPECT_TRUE(a.state.model == b.state.model);
    ASSERT_EQ(a.state.accepted.size(), b.state.accepted.size());
    for (std::size_t i = 0; i < a.state.accepted.size(); ++i)
        EXPECT_EQ(a.state.accepted[i].members, b.state.accepted[i].members);
}

TEST(Dynamic, RoundZeroMatchesStatic) {
    const auto cfg = small_world(2, 3, 3.0);
    const auto st = run_static(cfg);
    const auto dyn = run_dynamic(cfg);
    ASSERT_FALSE(dyn.history.empty());
    EXPECT_EQ(dyn.history.front().dra, st.report.dra);
}

TEST(Dynamic, HistoryHasOneRecordPerRoundPlusBaseline) {
    const auto s = run_dynamic(small_world(3));
    EXPECT_EQ(s.history.size(), static_cast<std::size_t>(s.round) + 1);
    for (std::size_t r = 0; r < s.history.size(); ++r) EXPECT_EQ(s.history[r].round, static_cast<int>(r));
    EXPECT_EQ(s.round, 3);
}

TEST(Dynamic, AcceptedSetsAreDisjointAndNeverHumanLabeled) {
    const auto cfg = small_world(4, 3, 3.0);
    const auto base = prepare(cfg);
    std::set<Index> human;
    for (Index i = 0; i < base.dataset.size(); ++i)
        if (base.dataset.labels[i] && base.dataset.provenance[i].kind == Provenance::Kind::human) human.insert(i);

    const auto s = run_dynamic(cfg);
    std::set<Index> seen;
    for (const auto& a : s.accepted) {
        for (Index i : a.members) {
            EXPECT_TRUE(seen.insert(i).second) << "index " << i << " accepted twice";
            EXPECT_FALSE(human.count(i)) << "human-labeled index " << i << " accepted";
        }
    }
}

TEST(Dynamic, PoolShrinksByTheAcceptedSize) {
    const auto s = run_dynamic(small_world(6, 3, 3.0));
    ASSERT_EQ(s.accepted.size() + 1, s.history.size());
    for (std::size_t r = 1; r < s.history.size(); ++r)
        EXPECT_EQ(s.history[r - 1].ood_pool_size - s.history[r].ood_pool_size, s.accepted[r - 1].size);
}

TEST(Dynamic, EvaluateStateIsPureAndMatchesLastRecord) {
    const auto s = run_dynamic(small_world(7, 3, 3.0));
    const auto before = s.dataset.labels;
    const auto a = evaluate_state(s);
    const auto b = evaluate_state(s);
    EXPECT_EQ(a.dra, b.dra);
    EXPECT_EQ(a.dra, s.history.back().dra);
    EXPECT_EQ(s.dataset.labels, before);
}

TEST(Dynamic, LearnabilityPicksPureClusters) {
    const auto s = run_dynamic(small_world(8));
    ASSERT_FALSE(s.accepted.empty());
    for (const auto& a : s.accepted) EXPECT_GE(a.purity, 0.9);
}

TEST(Dynamic, AcceptedLabelsAreNewVisibleClasses) {
    const auto s = run_dynamic(small_world(9));
    for (std::size_t j = 0; j < s.accepted.size(); ++j) EXPECT_EQ(s.accepted[j].visible_label, 3 + static_cast<int>(j));
    EXPECT_EQ(s.model.config.output_classes, s.dataset.n_classes_visible);
}

TEST(Dynamic, StopsEarlyWhenThePoolRunsOut) {
    auto cfg = small_world(10);
    cfg.rounds = 10;
    const auto s = run_dynamic(cfg);
    EXPECT_LT(s.round, 10);
    EXPECT_NE(s.stop_reason.find("pool exhausted"), std::string::npos) << s.stop_reason;
    EXPECT_EQ(s.history.size(), static_cast<std::size_t>(s.round) + 1);
}

TEST(Dynamic, ZeroRoundsKeepsOnlyTheBaseline) {
    auto cfg = small_world(11);
    cfg.rounds = 0;
    const auto s = run_dynamic(cfg);
    EXPECT_EQ(s.history.size(), 1u);
    EXPECT_TRUE(s.accepted.empty());
}

TEST(Dynamic, ThresholdPolicyAcceptsSeveralOrStops) {
    auto cfg = small_world(12);
    cfg.policy.kind = SelectionPolicy::Kind::threshold;
    cfg.policy.min_accuracy = 0.9;
    const auto s = run_dynamic(cfg);
    ASSERT_GE(s.history.size(), 2u);
    EXPECT_GE(s.history[1].accepted_ids.size(), 1u);

    cfg.policy.min_accuracy = 0.999999;
    cfg.data.gaussian.separation = 0.0;
    const auto none = run_dynamic(cfg);
    EXPECT_EQ(none.history.size(), 1u);
    EXPECT_NE(none.stop_reason.find("threshold"), std::string::npos) << none.stop_reason;
}

TEST(Prepare, DetectorRoutesRetainedSamplesToTheirClass) {
    auto cfg = small_world(13);
    cfg.ood.oracle = false;
    cfg.ood.quantile = 0.95;
    cfg.split.incoming_fraction = 0.5;
    cfg.epochs_initial = 30;
    cfg.adam.learning_rate = 0.01;
    cfg.adam.batch_size = 32;
    const auto s = prepare(cfg);
    ASSERT_TRUE(s.detector.has_value());
    std::size_t routed_retained = 0, correct = 0;
    for (Index i = 0; i < s.dataset.size(); ++i) {
        if (s.dataset.provenance[i].kind != Provenance::Kind::routed || s.dataset.true_labels[i] >= 3) continue;
        ++routed_retained;
        correct += s.dataset.visible_to_true[static_cast<std::size_t>(*s.dataset.labels[i])] == s.dataset.true_labels[i];
    }
    EXPECT_GT(routed_retained, 0u);
    EXPECT_GE(static_cast<double>(correct), 0.95 * static_cast<double>(routed_retained));
    EXPECT_FALSE(s.dataset.unlabeled_indices().empty());
    EXPECT_GT(evaluate_state(s).dra, 0.5);
}

TEST(Dynamic, RandomAndDensityPoliciesRun) {
    for (auto kind : {SelectionPolicy::Kind::random, SelectionPolicy::Kind::density}) {
        auto cfg = small_world(14);
        cfg.policy.kind = kind;
        const auto s = run_dynamic(cfg);
        EXPECT_EQ(s.round, 3) << to_string(kind);
    }
}

TEST(SeedRegistry, SubSeedsAreDistinctAndStable) {
    const auto a = SeedRegistry::from(42);
    const auto b = SeedRegistry::from(42);
    const std::set<std::uint64_t> all{a.split, a.init, a.shuffle, a.kmeans, a.policy, a.learnability, a.expand};
    EXPECT_EQ(all.size(), 7u);
    EXPECT_EQ(a.kmeans, b.kmeans);
    EXPECT_NE(SeedRegistry::from(43).kmeans, a.kmeans);
}

TEST(ClassCount, MoreTrainingClassesNeverHurtOnSyntheticData) {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ExperimentConfig cfg;
        cfg.data.kind = DataSource::Kind::gaussian;
        cfg.data.gaussian = {9, 10, 4.0, 80, 100 + seed};
        cfg.hidden_dims = {32};
        cfg.kmeans.k = 4;
        cfg.kmeans.restarts = 3;
        cfg.epochs_initial = 5;
        cfg.seed = seed;
        const auto rows = run_class_count_experiment(cfg, {2, 5}, {5, 6, 7, 8}, nullptr);
        ASSERT_EQ(rows.size(), 2u);
        EXPECT_EQ(rows[0].pool_size, rows[1].pool_size);
        wins += rows[1].cluster_accuracy >= rows[0].cluster_accuracy - 1e-12;
    }
    EXPECT_GE(wins, 4);
}

TEST(ClassCount, RejectsCountsOutsideTheAvailableRange) {
    ExperimentConfig cfg;
    cfg.data.gaussian = {6, 4, 5.0, 20, 1};
    EXPECT_THROW(run_class_count_experiment(cfg, {1}, {4, 5}), InvalidArgument);
    EXPECT_THROW(run_class_count_experiment(cfg, {5}, {4, 5}), InvalidArgument);
    EXPECT_THROW(run_class_count_experiment(cfg, {2}, {}), InvalidArgument);
}

TEST(ClassCount, CapsEveryClassAtTheSmallestCount) {
    ExperimentConfig cfg;
    cfg.data.gaussian = {6, 4, 5.0, 30, 1};
    cfg.hidden_dims = {16};
    cfg.kmeans.k = 2;
    cfg.kmeans.restarts = 2;
    cfg.split.per_class_cap = 25;
    const auto rows = run_class_count_experiment(cfg, {2, 3}, {4, 5});
    for (const auto& r : rows) {
        EXPECT_EQ(r.per_class, 25u);
        EXPECT_EQ(r.pool_size, 50u);
    }
}
