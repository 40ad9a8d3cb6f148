#include "scd/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace scd;
namespace fs = std::filesystem;

namespace {

json gaussian_config() {
    return json::parse(R"({
        "data": {"kind": "gaussian", "n_classes": 6, "dim": 5, "separation": 7.0, "per_class_n": 40, "seed": 3},
        "split": {"held_out_classes": [4, 5]},
        "network": {"hidden_dims": [16]},
        "kmeans": {"k": 2, "restarts": 2},
        "epochs_initial": 2,
        "seed": 9
    })");
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("scd_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string error_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, ParsesAGaussianConfig) {
    const auto c = config_from_json(gaussian_config());
    EXPECT_EQ(c.data.kind, DataSource::Kind::gaussian);
    EXPECT_EQ(c.data.gaussian.per_class_n, 40);
    EXPECT_EQ(c.split.held_out_classes, (std::set<int>{4, 5}));
    EXPECT_EQ(c.hidden_dims, std::vector<int>{16});
    EXPECT_EQ(c.kmeans.k, 2);
    EXPECT_EQ(c.epochs_initial, 2);
    EXPECT_EQ(c.effective_rounds(), 2);
    EXPECT_EQ(c.seed, 9u);
}

TEST(Config, DefaultsMatchTheDocumentedValues) {
    const auto c = config_from_json(json::parse(R"({"data": {"kind": "gaussian"}})"));
    EXPECT_EQ(c.hidden_dims, std::vector<int>{128});
    EXPECT_DOUBLE_EQ(c.adam.learning_rate, 1e-3);
    EXPECT_DOUBLE_EQ(c.adam.beta1, 0.9);
    EXPECT_DOUBLE_EQ(c.adam.beta2, 0.999);
    EXPECT_EQ(c.adam.batch_size, 128);
    EXPECT_EQ(c.kmeans.k, 15);
    EXPECT_EQ(c.kmeans.restarts, 10);
    EXPECT_EQ(c.epochs_initial, 1);
    EXPECT_EQ(c.epochs_per_round, 1);
    EXPECT_TRUE(c.ood.oracle);
}

TEST(Config, UnknownKeysAreRejectedWithTheirLocation) {
    auto j = gaussian_config();
    j["kmeans"]["kk"] = 3;
    EXPECT_NE(error_of(j).find("kmeans: unknown key 'kk'"), std::string::npos) << error_of(j);
    j = gaussian_config();
    j["verbose"] = true;
    EXPECT_NE(error_of(j).find("unknown key 'verbose'"), std::string::npos);
}

TEST(Config, InvalidValuesAreRejected) {
    auto j = gaussian_config();
    j["ood"] = {{"mode", "detector"}, {"quantile", 1.5}};
    EXPECT_NE(error_of(j).find("quantile"), std::string::npos) << error_of(j);

    j = gaussian_config();
    j["kmeans"]["k"] = 0;
    EXPECT_FALSE(error_of(j).empty());

    j = gaussian_config();
    j["policy"] = {{"kind", "greedy"}};
    EXPECT_NE(error_of(j).find("policy.kind"), std::string::npos);

    j = gaussian_config();
    j["epochs_initial"] = "two";
    EXPECT_NE(error_of(j).find("config.epochs_initial"), std::string::npos);

    EXPECT_NE(error_of(json::parse(R"({"data": {"kind": "idx", "labels": "x"}})")).find("data.images"),
              std::string::npos);
    EXPECT_NE(error_of(json::parse(R"({"seed": 1})")).find("data"), std::string::npos);
}

TEST(Config, RoundTripsThroughJson) {
    auto j = gaussian_config();
    j["policy"] = {{"kind", "threshold"}, {"min_accuracy", 0.8}};
    j["ood"] = {{"mode", "detector"}, {"quantile", 0.9}};
    j["split"]["per_class_cap"] = 30;
    j["split"]["incoming_fraction"] = 0.25;
    j["rounds"] = 1;
    const auto c = config_from_json(j);
    const auto again = config_to_json(config_from_json(config_to_json(c)));
    EXPECT_EQ(config_to_json(c), again);
    EXPECT_EQ(again["policy"]["kind"], "threshold");
    EXPECT_EQ(again["split"]["per_class_cap"], 30);
    EXPECT_EQ(again["rounds"], 1);
}

TEST(Config, RelativePathsResolveAgainstTheConfigDirectory) {
    const auto dir = scratch("relative");
    fs::create_directories(dir / "conf");
    std::ofstream(dir / "conf" / "run.json") << R"({"data": {"kind": "idx", "images": "../data/img", "labels": "lab"}})";
    const auto c = load_config((dir / "conf" / "run.json").string());
    EXPECT_EQ(fs::path(c.data.images_path), (dir / "data" / "img").lexically_normal());
    EXPECT_EQ(fs::path(c.data.labels_path), (dir / "conf" / "lab").lexically_normal());
}

TEST(Config, MissingFileAndBadJsonAreConfigErrors) {
    EXPECT_THROW(load_config("/nonexistent/scd.json"), ConfigError);
    const auto dir = scratch("badjson");
    std::ofstream(dir / "bad.json") << "{ \"data\": ";
    EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
}

TEST(Config, DataChecksCatchOversizedKAndMissingFiles) {
    auto c = config_from_json(gaussian_config());
    EXPECT_NO_THROW(validate_against_data(c));
    c.kmeans.k = 81;
    try {
        validate_against_data(c);
        FAIL() << "expected a ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("exceeds the pool size 80"), std::string::npos) << e.what();
    }
    c = config_from_json(json::parse(R"({"data": {"kind": "idx", "images": "/nonexistent/i", "labels": "/nonexistent/l"}})"));
    EXPECT_THROW(validate_against_data(c), ConfigError);
}

TEST(Report, EmbedsAConfigThatLoadsBackIdentically) {
    const auto cfg = config_from_json(gaussian_config());
    const auto s = run_dynamic(cfg);
    const auto report = report_to_json(s, "dynamic", 0.0);
    EXPECT_EQ(report["format"], "scd-report/1");
    EXPECT_EQ(report["rounds"].size(), s.history.size());
    EXPECT_EQ(report["seeds"]["kmeans"], s.seeds.kmeans);
    EXPECT_EQ(report["final_dra"].get<double>(), s.history.back().dra);

    const auto dir = scratch("report");
    write_text(dir / "report.json", report.dump(2));
    const auto back = load_config((dir / "report.json").string());
    EXPECT_EQ(config_to_json(back), config_to_json(cfg));
    EXPECT_EQ(curves_csv(run_dynamic(back)), curves_csv(s));
}

TEST(Csv, CurvesHaveOneRowPerRecord) {
    const auto s = run_dynamic(config_from_json(gaussian_config()));
    const auto text = curves_csv(s);
    EXPECT_EQ(text.rfind("round,dra,mean_cluster_accuracy,ood_pool_size,train_loss\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), s.history.size() + 1);
    EXPECT_NE(text.find("\n0,"), std::string::npos);
    EXPECT_NE(text.find(",nan\n"), std::string::npos);
}

TEST(Csv, ClustersMarkTheAcceptedCandidate) {
    const auto s = run_dynamic(config_from_json(gaussian_config()));
    const auto text = clusters_csv(s);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "round,source,cluster_id,size,mapped_label,accuracy,learnability,density,scoreable,accepted");
    int accepted = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9) << line;
        if (line.find(",candidate,") != std::string::npos && line.back() == '1') ++accepted;
    }
    EXPECT_EQ(accepted, static_cast<int>(s.accepted.size()));
}

TEST(Csv, ClassCountRows) {
    const std::vector<ClassCountRow> rows{{2, 0.5, 100, 50}, {3, 0.75, 100, 50}};
    EXPECT_EQ(classcount_csv(rows),
              "class_count,cluster_accuracy,pool_size,per_class\n2,0.5000000000,100,50\n3,0.7500000000,100,50\n");
}
