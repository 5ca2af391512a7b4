#include "bacdet/classify/ensemble.hpp"

#include "bacdet/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <unordered_set>

namespace bacdet {

const char* to_string(BaseKind kind) {
  switch (kind) {
    case BaseKind::svm_rbf: return "svm_rbf";
    case BaseKind::random_forest: return "random_forest";
    case BaseKind::gradient_boosted_trees: return "gradient_boosted_trees";
  }
  return "?";
}

BaseKind base_kind_from_string(const std::string& name) {
  for (BaseKind k : kEnsembleKinds)
    if (name == to_string(k)) return k;
  throw config_error("unknown classifier kind '" + name + "'");
}

nlohmann::json ClassifierHyper::to_json() const {
  return {{"svm", svm.to_json()}, {"forest", forest.to_json()}, {"boost", boost.to_json()}};
}

ClassifierHyper ClassifierHyper::from_json(const nlohmann::json& j) {
  ClassifierHyper h;
  h.svm = SvmConfig::from_json(j.at("svm"));
  h.forest = RfConfig::from_json(j.at("forest"));
  h.boost = GbtConfig::from_json(j.at("boost"));
  return h;
}

BaseModel BaseModel::fit(BaseKind kind, const std::vector<TrainingItem>& data,
                         const ClassifierHyper& hyper, std::uint64_t seed) {
  if (data.empty()) throw data_error("classifier training pool is empty");
  const std::string& spec = data[0].features.spec_id;
  const Eigen::Index d = data[0].features.values.size();

  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), d);
  std::vector<int> y01(data.size());
  int n_pos = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TrainingItem& item = data[i];
    if (item.features.spec_id != spec || item.features.values.size() != d)
      throw data_error("inconsistent feature spec in training pool");
    if (!item.features.values.allFinite())
      throw data_error("non-finite feature values for region " + item.region_id);
    x.row(static_cast<Eigen::Index>(i)) = item.features.values.transpose();
    y01[i] = item.label == RegionLabel::bacilli ? 1 : 0;
    n_pos += y01[i];
  }
  if (n_pos == 0 || n_pos == static_cast<int>(data.size()))
    throw data_error("single-class training data: both labels must be present");

  BaseModel m;
  m.kind_ = kind;
  m.spec_ = spec;
  switch (kind) {
    case BaseKind::svm_rbf: m.svm_.fit(x, y01, hyper.svm); break;
    case BaseKind::random_forest: m.forest_.fit(x, y01, hyper.forest, seed); break;
    case BaseKind::gradient_boosted_trees: m.boost_.fit(x, y01, hyper.boost); break;
  }
  return m;
}

RegionLabel BaseModel::predict(const FeatureVector& fv) const {
  if (fv.spec_id != spec_)
    throw data_error("feature-spec mismatch: model expects '" + spec_ + "', got '" +
                     fv.spec_id + "'");
  return predict_values(fv.values);
}

RegionLabel BaseModel::predict_values(const Eigen::VectorXd& values) const {
  int p = 0;
  switch (kind_) {
    case BaseKind::svm_rbf: p = svm_.predict(values); break;
    case BaseKind::random_forest: p = forest_.predict(values); break;
    case BaseKind::gradient_boosted_trees: p = boost_.predict(values); break;
  }
  return p ? RegionLabel::bacilli : RegionLabel::non_bacilli;
}

nlohmann::json BaseModel::to_json() const {
  nlohmann::json model;
  switch (kind_) {
    case BaseKind::svm_rbf: model = svm_.to_json(); break;
    case BaseKind::random_forest: model = forest_.to_json(); break;
    case BaseKind::gradient_boosted_trees: model = boost_.to_json(); break;
  }
  return {{"kind", to_string(kind_)}, {"spec", spec_}, {"model", std::move(model)}};
}

BaseModel BaseModel::from_json(const nlohmann::json& j) {
  BaseModel m;
  m.kind_ = base_kind_from_string(j.at("kind").get<std::string>());
  m.spec_ = j.at("spec").get<std::string>();
  switch (m.kind_) {
    case BaseKind::svm_rbf: m.svm_ = SvmRbf::from_json(j.at("model")); break;
    case BaseKind::random_forest: m.forest_ = RandomForest::from_json(j.at("model")); break;
    case BaseKind::gradient_boosted_trees:
      m.boost_ = GradientBoostedTrees::from_json(j.at("model"));
      break;
  }
  return m;
}

std::array<RegionLabel, 3> TrainedEnsemble::votes(const FeatureVector& fv) const {
  return {base_models[0].predict(fv), base_models[1].predict(fv), base_models[2].predict(fv)};
}

RegionLabel TrainedEnsemble::predict(const FeatureVector& fv) const {
  const auto v = votes(fv);
  int n_bacilli = 0;
  for (RegionLabel l : v) n_bacilli += l == RegionLabel::bacilli ? 1 : 0;
  return n_bacilli >= 2 ? RegionLabel::bacilli : RegionLabel::non_bacilli;
}

RegionLabel TrainedEnsemble::predict_roi(const Roi& roi) const {
  return predict(featurize(roi, feature_spec_id));
}

void TrainedEnsemble::save(const std::filesystem::path& path) const {
  nlohmann::json j = {{"kind", "ensemble"},
                      {"version", 1},
                      {"feature_spec", feature_spec_id},
                      {"seed", seed},
                      {"base_models", nlohmann::json::array()},
                      {"individual_variants", nlohmann::json::array()}};
  for (const BaseModel& m : base_models) j["base_models"].push_back(m.to_json());
  for (const BaseModel& m : individual_variants)
    j["individual_variants"].push_back(m.to_json());

  const std::vector<std::uint8_t> buf = nlohmann::json::to_msgpack(j);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write ensemble checkpoint: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw io_error("write failed for ensemble checkpoint: " + path.string());
}

TrainedEnsemble TrainedEnsemble::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("missing ensemble checkpoint: " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  nlohmann::json j = nlohmann::json::from_msgpack(buf, true, false);
  if (j.is_discarded() || !j.is_object() || j.value("kind", "") != "ensemble")
    throw io_error("not an ensemble checkpoint: " + path.string());
  if (j.at("version").get<int>() != 1)
    throw io_error("unsupported ensemble checkpoint version in " + path.string());

  TrainedEnsemble e;
  e.feature_spec_id = j.at("feature_spec").get<std::string>();
  e.seed = j.at("seed").get<std::uint64_t>();
  for (int i = 0; i < 3; ++i) {
    e.base_models[static_cast<std::size_t>(i)] =
        BaseModel::from_json(j.at("base_models")[static_cast<std::size_t>(i)]);
    e.individual_variants[static_cast<std::size_t>(i)] =
        BaseModel::from_json(j.at("individual_variants")[static_cast<std::size_t>(i)]);
  }
  return e;
}

BaseModel train_base(BaseKind kind, const std::vector<TrainingItem>& data,
                     const ClassifierHyper& hyper, std::uint64_t seed) {
  return BaseModel::fit(kind, data, hyper, seed);
}

TrainedEnsemble train_ensemble(const std::array<std::vector<TrainingItem>, 3>& pools,
                               const ClassifierHyper& hyper, std::uint64_t seed) {
  std::unordered_set<std::string> seen;
  for (std::size_t p = 0; p < pools.size(); ++p) {
    if (pools[p].empty()) throw data_error("pool " + std::to_string(p) + " is empty");
    std::int64_t n_pos = 0;
    for (const TrainingItem& item : pools[p]) {
      if (!seen.insert(item.region_id).second)
        throw data_error("pools not disjoint: region '" + item.region_id +
                         "' appears more than once");
      n_pos += item.label == RegionLabel::bacilli ? 1 : 0;
    }
    const auto total = static_cast<std::int64_t>(pools[p].size());
    if (std::llabs(2 * n_pos - total) > static_cast<std::int64_t>(0.1 * total) + 1)
      throw data_error("pool " + std::to_string(p) + " is not class-balanced within 10%");
    if (pools[p][0].features.spec_id != pools[0][0].features.spec_id)
      throw data_error("pools use different feature specs");
  }

  std::vector<TrainingItem> pooled;
  for (const auto& p : pools) pooled.insert(pooled.end(), p.begin(), p.end());

  TrainedEnsemble e;
  e.feature_spec_id = pools[0][0].features.spec_id;
  e.seed = seed;
  for (std::size_t i = 0; i < kEnsembleKinds.size(); ++i) {
    e.individual_variants[i] =
        BaseModel::fit(kEnsembleKinds[i], pools[i], hyper, derive_seed(seed, i, 1));
    e.base_models[i] = BaseModel::fit(kEnsembleKinds[i], pooled, hyper, derive_seed(seed, i, 2));
  }
  return e;
}

}  // namespace bacdet
