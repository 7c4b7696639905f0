#include "genmil/model_io.hpp"

#include "genmil/io.hpp"
#include "json.hpp"

namespace genmil {

namespace {

using nlohmann::json;

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

VectorXd vec_of(const json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

MatrixXd mat_of(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw Error(ErrorKind::kParse, "model file: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json gaussian_json(const GaussianDensity& g) {
  return {{"kind", g.diagonal_only() ? "gauss-diag" : "gauss"},
          {"mean", vec_json(g.mean())},
          {"covariance", mat_json(g.covariance())}};
}

GaussianDensity gaussian_of(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "gauss" && kind != "gauss-diag")
    throw Error(ErrorKind::kParse, "model file: expected a gaussian, got '" + kind + "'");
  return GaussianDensity(vec_of(j.at("mean")), mat_of(j.at("covariance")), kind == "gauss-diag");
}

json density_json(const DensityModel& d) {
  return std::visit(
      [&](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianDensity>) {
          return gaussian_json(m);
        } else if constexpr (std::is_same_v<T, KdeDensity>) {
          return {{"kind", "kde"}, {"support", mat_json(m.support())},
                  {"bandwidths", vec_json(m.bandwidths())}};
        } else {
          json marginals = json::array();
          for (const auto& k : m.marginals())
            marginals.push_back({{"support", vec_json(k.support().col(0))},
                                 {"bandwidth", k.bandwidths()[0]}});
          return {{"kind", std::string(to_string(d.kind()))}, {"clip", m.clip()},
                  {"correlation", mat_json(m.correlation())}, {"marginals", marginals}};
        }
      },
      d.model());
}

DensityModel density_of(const json& j) {
  const auto kind = parse_density_kind(j.at("kind").get<std::string>());
  switch (kind) {
    case DensityKind::kGaussian:
    case DensityKind::kGaussianDiag:
      return {kind, gaussian_of(j)};
    case DensityKind::kKde:
      return {kind, KdeDensity(mat_of(j.at("support")), vec_of(j.at("bandwidths")))};
    case DensityKind::kCopula:
    case DensityKind::kCopulaDiag: {
      std::vector<KdeDensity> marginals;
      for (const auto& mj : j.at("marginals")) {
        VectorXd h(1);
        h[0] = mj.at("bandwidth").get<double>();
        marginals.emplace_back(MatrixXd(vec_of(mj.at("support"))), h);
      }
      return {kind, CopulaDensity(std::move(marginals), mat_of(j.at("correlation")),
                                  j.at("clip").get<double>())};
    }
  }
  throw Error(ErrorKind::kParse, "model file: unknown density");
}

json classifier_json(const ClassProbModel& c) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          return {{"kind", "lr"}, {"weights", mat_json(m.weights())}, {"ridge", m.ridge()}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return {{"kind", "knn"}, {"support", mat_json(m.support())}, {"labels", m.labels()},
                  {"classes", m.classes()}, {"k", m.k()}, {"alpha", m.alpha()}};
        } else if constexpr (std::is_same_v<T, QdaModel>) {
          json dens = json::array();
          for (const auto& g : m.densities()) dens.push_back(gaussian_json(g));
          return {{"kind", "qda"}, {"priors", vec_json(m.priors())}, {"densities", dens}};
        } else {
          return {{"kind", "dd"}, {"target", vec_json(m.target())}, {"scales", vec_json(m.scales())}};
        }
      },
      c.model());
}

ClassProbModel classifier_of(const json& j) {
  switch (parse_classifier_kind(j.at("kind").get<std::string>())) {
    case ClassifierKind::kLogistic:
      return ClassProbModel(LogisticModel(mat_of(j.at("weights")), j.at("ridge").get<double>()));
    case ClassifierKind::kKnn:
      return ClassProbModel(KnnModel(mat_of(j.at("support")), j.at("labels").get<std::vector<Label>>(),
                                     j.at("classes").get<int>(), j.at("k").get<int>(),
                                     j.at("alpha").get<double>()));
    case ClassifierKind::kQda: {
      std::vector<GaussianDensity> dens;
      for (const auto& g : j.at("densities")) dens.push_back(gaussian_of(g));
      return ClassProbModel(QdaModel(vec_of(j.at("priors")), std::move(dens)));
    }
    case ClassifierKind::kDiverseDensity:
      return ClassProbModel(DiverseDensityModel(vec_of(j.at("target")), vec_of(j.at("scales"))));
  }
  throw Error(ErrorKind::kParse, "model file: unknown classifier");
}

json pca_json(const PcaTransform& p) {
  return {{"input_dim", p.input_dim},
          {"kept_features", p.kept_features},
          {"center", vec_json(p.center)},
          {"scale", vec_json(p.scale)},
          {"components", mat_json(p.components)},
          {"spectrum", vec_json(p.spectrum)},
          {"retained_fraction", p.retained_fraction},
          {"measure", std::string(to_string(p.measure))}};
}

PcaTransform pca_of(const json& j) {
  PcaTransform p;
  p.input_dim = j.at("input_dim").get<int>();
  p.kept_features = j.at("kept_features").get<std::vector<int>>();
  p.center = vec_of(j.at("center"));
  p.scale = vec_of(j.at("scale"));
  p.components = mat_of(j.at("components"));
  p.spectrum = vec_of(j.at("spectrum"));
  p.retained_fraction = j.at("retained_fraction").get<double>();
  p.measure = parse_spectrum_measure(j.at("measure").get<std::string>());
  if (p.center.size() != p.input_dim || p.scale.size() != p.input_dim ||
      p.components.rows() != static_cast<Eigen::Index>(p.kept_features.size()))
    throw Error(ErrorKind::kParse, "model file: inconsistent PCA block");
  return p;
}

}  // namespace

std::string model_to_json(const SavedModel& s) {
  json j;
  j["format"] = "genmil-model";
  j["version"] = kModelFormatVersion;
  j["classes"] = model_classes(s.model);
  j["dim"] = s.input_dim();
  j["pca"] = s.pca ? pca_json(*s.pca) : json(nullptr);
  if (const auto* bif = std::get_if<BifParams>(&s.model)) {
    j["structure"] = "bif";
    json dens = json::array();
    for (const auto& d : bif->class_densities()) dens.push_back(density_json(d));
    j["bif"] = {{"bag_prior", vec_json(bif->bag_prior())},
                {"instance_table", mat_json(bif->instance_table())},
                {"class_densities", dens}};
  } else {
    const auto& fib = std::get<FibParams>(s.model);
    j["structure"] = "fib";
    j["fib"] = {{"feature_density", density_json(fib.feature_density())},
                {"classifier", classifier_json(fib.instance_classifier())}};
  }
  j["training"] = {{"density", s.density},
                   {"feature_density", s.feature_density},
                   {"classifier", s.classifier},
                   {"iterations", s.iterations},
                   {"converged", s.converged}};
  return j.dump(1) + "\n";
}

SavedModel model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "genmil-model")
      throw Error(ErrorKind::kParse, "not a genmil model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion)
      throw Error(ErrorKind::kParse, "unsupported model format version " + std::to_string(version));
    std::optional<PcaTransform> pca;
    if (!j.at("pca").is_null()) pca = pca_of(j.at("pca"));
    const auto structure = j.at("structure").get<std::string>();
    std::optional<MilModel> model;
    if (structure == "bif") {
      const auto& b = j.at("bif");
      std::vector<DensityModel> dens;
      for (const auto& d : b.at("class_densities")) dens.push_back(density_of(d));
      model.emplace(BifParams(vec_of(b.at("bag_prior")), mat_of(b.at("instance_table")), std::move(dens)));
    } else if (structure == "fib") {
      const auto& f = j.at("fib");
      model.emplace(FibParams(density_of(f.at("feature_density")), classifier_of(f.at("classifier"))));
    } else {
      throw Error(ErrorKind::kParse, "unknown model structure '" + structure + "'");
    }
    const auto& tr = j.at("training");
    SavedModel s{.model = std::move(*model),
                 .pca = std::move(pca),
                 .density = tr.at("density").get<std::string>(),
                 .feature_density = tr.at("feature_density").get<std::string>(),
                 .classifier = tr.at("classifier").get<std::string>(),
                 .iterations = tr.at("iterations").get<int>(),
                 .converged = tr.at("converged").get<bool>()};
    if (s.pca && s.pca->output_dim() != model_dim(s.model))
      throw Error(ErrorKind::kParse, "model file: PCA output does not match model dimension");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("model file: ") + e.what());
  }
}

void save_model(const SavedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model));
}

SavedModel load_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

}  // namespace genmil
