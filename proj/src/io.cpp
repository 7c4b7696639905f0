#include "genmil/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace genmil {

namespace {

using nlohmann::json;

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what);
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return in;
}

VectorXd vec_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorKind::kConfig, std::string(what) + " must be an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

MatrixXd mat_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw Error(ErrorKind::kConfig, std::string(what) + " must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (j[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(cols))
      throw Error(ErrorKind::kConfig, std::string(what) + " rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ----------------------------------------------------------- Bag CSV

Dataset read_bag_csv(std::istream& in, std::optional<int> classes, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) parse_error(source, 1, "missing header");
  ++line_no;
  const auto header = split(trim(line), ',');
  if (header.size() < 4 || trim(header[0]) != "bag_id" || trim(header[1]) != "bag_label" ||
      trim(header[2]) != "instance_label")
    parse_error(source, 1, "header must be bag_id,bag_label,instance_label,f_1,...,f_p");
  const std::size_t p = header.size() - 3;

  struct Pending {
    std::string id;
    std::optional<Label> label;
    std::size_t first_line = 0;
    std::vector<std::vector<double>> rows;
    std::vector<std::optional<Label>> gold;
  };
  std::vector<Pending> bags;
  std::map<std::string, std::size_t, std::less<>> index;
  int max_label = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != header.size())
      parse_error(source, line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                       std::to_string(cells.size()));
    const std::string id(trim(cells[0]));
    if (id.empty()) parse_error(source, line_no, "empty bag_id");
    std::optional<Label> bag_label;
    if (!trim(cells[1]).empty()) {
      auto v = to_int(cells[1]);
      if (!v || *v < 1) parse_error(source, line_no, "bag_label must be a positive integer");
      bag_label = *v;
      max_label = std::max(max_label, *v);
    }
    std::optional<Label> gold;
    if (!trim(cells[2]).empty()) {
      auto v = to_int(cells[2]);
      if (!v || *v < 1) parse_error(source, line_no, "instance_label must be a positive integer");
      gold = *v;
      max_label = std::max(max_label, *v);
    }
    std::vector<double> features(p);
    for (std::size_t k = 0; k < p; ++k) {
      auto v = to_double(cells[3 + k]);
      if (!v)
        parse_error(source, line_no, "non-numeric feature '" + std::string(trim(cells[3 + k])) +
                                         "' in column " + std::string(trim(header[3 + k])));
      features[k] = *v;
    }
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, bags.size()).first;
      bags.push_back({id, bag_label, line_no, {}, {}});
    }
    Pending& bag = bags[it->second];
    if (bag.label != bag_label)
      parse_error(source, line_no, "bag '" + id + "' has conflicting bag labels (first seen on line " +
                                       std::to_string(bag.first_line) + ")");
    if (!bag.gold.empty() && bag.gold.front().has_value() != gold.has_value())
      parse_error(source, line_no, "bag '" + id + "' mixes rows with and without instance labels");
    bag.rows.push_back(std::move(features));
    bag.gold.push_back(gold);
  }
  if (bags.empty()) parse_error(source, line_no, "no data rows");

  const int t = classes.value_or(std::max(2, max_label));
  if (max_label > t)
    throw Error(ErrorKind::kInvalidLabel, source + ": label " + std::to_string(max_label) +
                                              " exceeds t=" + std::to_string(t));
  std::vector<Bag> out;
  out.reserve(bags.size());
  for (auto& pb : bags) {
    Bag b;
    b.id = pb.id;
    b.label = pb.label;
    b.instances.resize(static_cast<Eigen::Index>(pb.rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < pb.rows.size(); ++r)
      for (std::size_t k = 0; k < p; ++k)
        b.instances(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = pb.rows[r][k];
    if (pb.gold.front()) {
      std::vector<Label> g;
      for (const auto& l : pb.gold) g.push_back(*l);
      b.gold_labels = std::move(g);
    }
    out.push_back(std::move(b));
  }
  return Dataset(std::move(out), LabelDomain(t));
}

Dataset load_bag_csv(const std::filesystem::path& path, std::optional<int> classes) {
  auto in = open_input(path);
  return read_bag_csv(in, classes, path.string());
}

void write_bag_csv(const Dataset& data, std::ostream& out) {
  out << "bag_id,bag_label,instance_label";
  for (int k = 1; k <= data.dim(); ++k) out << ",f_" << k;
  out << '\n';
  for (std::size_t v = 0; v < data.size(); ++v) {
    const Bag& b = data.bag(v);
    const std::string id = b.id.empty() ? "bag" + std::to_string(v + 1) : b.id;
    for (int j = 0; j < b.size(); ++j) {
      out << id << ',';
      if (b.label) out << *b.label;
      out << ',';
      if (b.gold_labels) out << (*b.gold_labels)[static_cast<std::size_t>(j)];
      for (int k = 0; k < b.dim(); ++k) out << ',' << format_double(b.instances(j, k));
      out << '\n';
    }
  }
}

void save_bag_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream os;
  write_bag_csv(data, os);
  write_file_atomic(path, os.str());
}

// -------------------------------------------------------------- MUSK1

Dataset read_musk1(std::istream& in, const std::string& source) {
  constexpr std::size_t kColumns = kMuskFeatures + 3;
  std::vector<Bag> bags;
  std::map<std::string, std::size_t, std::less<>> index;
  std::vector<std::vector<std::vector<double>>> rows;
  std::vector<std::vector<int>> classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), ',');
    if (cells.size() != kColumns)
      parse_error(source, line_no, "expected " + std::to_string(kColumns) + " columns, got " +
                                       std::to_string(cells.size()));
    const std::string molecule(trim(cells[0]));
    std::vector<double> features(kMuskFeatures);
    for (std::size_t k = 0; k < kMuskFeatures; ++k) {
      auto v = to_double(cells[2 + k]);
      if (!v) parse_error(source, line_no, "non-numeric feature in column " + std::to_string(k + 3));
      features[k] = *v;
    }
    auto cls = to_double(cells[kColumns - 1]);
    if (!cls || (*cls != 0.0 && *cls != 1.0)) parse_error(source, line_no, "class must be 0 or 1");
    auto it = index.find(molecule);
    if (it == index.end()) {
      it = index.emplace(molecule, bags.size()).first;
      Bag b;
      b.id = molecule;
      bags.push_back(std::move(b));
      rows.emplace_back();
      classes.emplace_back();
    }
    rows[it->second].push_back(std::move(features));
    classes[it->second].push_back(static_cast<int>(*cls));
  }
  if (bags.empty()) parse_error(source, line_no, "no data rows");
  for (std::size_t v = 0; v < bags.size(); ++v) {
    const auto& cs = classes[v];
    if (std::any_of(cs.begin(), cs.end(), [&](int c) { return c != cs.front(); }))
      throw Error(ErrorKind::kParse, source + ": molecule '" + bags[v].id + "' has mixed classes");
    bags[v].label = cs.front() == 1 ? 2 : 1;
    bags[v].instances.resize(static_cast<Eigen::Index>(rows[v].size()), kMuskFeatures);
    for (std::size_t r = 0; r < rows[v].size(); ++r)
      for (int k = 0; k < kMuskFeatures; ++k)
        bags[v].instances(static_cast<Eigen::Index>(r), k) = rows[v][r][static_cast<std::size_t>(k)];
  }
  return Dataset(std::move(bags), LabelDomain(2));
}

Dataset load_musk1(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_musk1(in, path.string());
}

// ---------------------------------------------------------- Generator

GeneratorConfig parse_generator_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("generator config: ") + e.what());
  }
  try {
    GeneratorConfig c;
    c.t = j.at("t").get<int>();
    c.p = j.at("p").get<int>();
    c.bag_prior = vec_from_json(j.at("bag_prior"), "bag_prior");
    c.instance_table = mat_from_json(j.at("instance_table"), "instance_table");
    for (const auto& cj : j.at("classes")) {
      ClassDensitySpec s;
      s.mean = vec_from_json(cj.at("mean"), "mean");
      if (cj.contains("covariance")) {
        s.covariance = mat_from_json(cj.at("covariance"), "covariance");
      } else {
        VectorXd var = vec_from_json(cj.at("variances"), "variances");
        s.covariance = var.asDiagonal();
        s.diagonal = true;
      }
      c.classes.push_back(std::move(s));
    }
    c.bag_count = j.value("bag_count", c.bag_count);
    c.bag_size_min = j.value("bag_size_min", c.bag_size_min);
    c.bag_size_max = j.value("bag_size_max", c.bag_size_max);
    c.seed = j.value("seed", c.seed);
    if (j.contains("normal_fraction_range")) {
      const auto& r = j.at("normal_fraction_range");
      c.normal_fraction_range = std::pair{r.at(0).get<double>(), r.at(1).get<double>()};
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("generator config: ") + e.what());
  }
}

GeneratorConfig load_generator_config(const std::filesystem::path& path) {
  return parse_generator_config(read_file(path));
}

std::string generator_config_to_json(const GeneratorConfig& c) {
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto mat = [&](const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
    return rows;
  };
  json j;
  j["t"] = c.t;
  j["p"] = c.p;
  j["bag_prior"] = vec(c.bag_prior);
  j["instance_table"] = mat(c.instance_table);
  j["classes"] = json::array();
  for (const auto& s : c.classes) {
    json cj;
    cj["mean"] = vec(s.mean);
    if (s.diagonal)
      cj["variances"] = vec(s.covariance.diagonal());
    else
      cj["covariance"] = mat(s.covariance);
    j["classes"].push_back(cj);
  }
  j["bag_count"] = c.bag_count;
  j["bag_size_min"] = c.bag_size_min;
  j["bag_size_max"] = c.bag_size_max;
  j["seed"] = c.seed;
  if (c.normal_fraction_range)
    j["normal_fraction_range"] = {c.normal_fraction_range->first, c.normal_fraction_range->second};
  return j.dump(2) + "\n";
}

GeneratorConfig default_synthetic_config(std::uint64_t seed) {
  GeneratorConfig c;
  c.t = 3;
  c.p = 8;
  c.bag_prior = VectorXd::Constant(3, 1.0 / 3.0);
  c.instance_table.resize(3, 3);
  c.instance_table << 1.0, 0.0, 0.0,
                      0.5, 0.5, 0.0,
                      0.5, 0.0, 0.5;
  // Every disordered class is offset in all 8 coordinates, so its distance
  // from the normal class is 2.5 * sqrt(8) ~ 7.1 unit standard deviations;
  // the two disordered classes differ by 5 in 4 coordinates (10 SD).
  const double offset = 2.5;
  for (int i = 0; i < 3; ++i) {
    ClassDensitySpec s;
    s.mean = VectorXd::Zero(c.p);
    if (i == 1) s.mean.setConstant(offset);
    if (i == 2) {
      s.mean.head(4).setConstant(offset);
      s.mean.tail(4).setConstant(-offset);
    }
    s.covariance = MatrixXd::Identity(c.p, c.p);
    s.diagonal = true;
    c.classes.push_back(std::move(s));
  }
  c.bag_count = 80;
  c.seed = seed;
  c.normal_fraction_range = std::pair{0.3, 0.7};
  return c;
}

BifParams generator_params(const GeneratorConfig& c) {
  try {
    if (c.t < 2) throw Error(ErrorKind::kConfig, "t must be >= 2");
    if (c.bag_prior.size() != c.t || c.instance_table.rows() != c.t ||
        c.instance_table.cols() != c.t || static_cast<int>(c.classes.size()) != c.t)
      throw Error(ErrorKind::kConfig, "bag_prior, instance_table and classes must all have t entries");
    if (c.bag_size_min < 1 || c.bag_size_min > c.bag_size_max)
      throw Error(ErrorKind::kConfig, "bag size range must satisfy 1 <= min <= max");
    if (c.bag_count < 1) throw Error(ErrorKind::kConfig, "bag_count must be >= 1");
    std::vector<DensityModel> densities;
    for (const auto& s : c.classes) {
      if (s.mean.size() != c.p)
        throw Error(ErrorKind::kConfig, "class mean must have p entries");
      densities.emplace_back(s.diagonal ? DensityKind::kGaussianDiag : DensityKind::kGaussian,
                             GaussianDensity(s.mean, s.covariance, s.diagonal));
    }
    return BifParams(c.bag_prior, c.instance_table, std::move(densities));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    throw Error(ErrorKind::kConfig, std::string("generator config: ") + e.what());
  }
}

Dataset generate_synthetic(const GeneratorConfig& c) {
  BifParams params = generator_params(c);
  if (!c.normal_fraction_range)
    return bif_sample(params, c.bag_count, uniform_bag_size(c.bag_size_min, c.bag_size_max), c.seed);

  const auto [lo, hi] = *c.normal_fraction_range;
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0))
    throw Error(ErrorKind::kConfig, "normal_fraction_range must satisfy 0 <= lo <= hi <= 1");
  // Draw bags one at a time from a seeded stream of sub-seeds and reject
  // disordered bags whose normal share falls outside the range.
  Rng seeder(c.seed);
  const auto sizes = uniform_bag_size(c.bag_size_min, c.bag_size_max);
  std::vector<Bag> bags;
  int attempts = 0;
  while (static_cast<int>(bags.size()) < c.bag_count) {
    if (++attempts > 1000 * c.bag_count)
      throw Error(ErrorKind::kConfig, "normal_fraction_range rejects nearly every bag");
    Dataset one = bif_sample(params, 1, sizes, seeder());
    Bag bag = one.bag(0);
    if (*bag.label != kNormalLabel) {
      const auto& g = *bag.gold_labels;
      const double normal = static_cast<double>(std::count(g.begin(), g.end(), kNormalLabel)) /
                            static_cast<double>(g.size());
      if (normal < lo || normal > hi) continue;
    }
    bag.id = "bag" + std::to_string(bags.size() + 1);
    bags.push_back(std::move(bag));
  }
  return Dataset(std::move(bags), LabelDomain(c.t));
}

// -------------------------------------------------------------- Reports

void write_report(const EvalReport& r, std::ostream& out) {
  out << "model=" << r.model_name << '\n';
  out << "classes=" << r.classes << '\n';
  out << "folds=" << r.folds << '\n';
  out << "evaluated_folds=" << r.evaluated_folds << '\n';
  out << "degenerate_folds=" << r.degenerate_folds << '\n';
  out << "bag_accuracy=" << format_double(r.bag_accuracy) << '\n';
  out << "instance_accuracy=" << (r.instance_accuracy ? format_double(*r.instance_accuracy) : "NA") << '\n';
  out << "train_loglik=" << (r.train_loglik ? format_double(*r.train_loglik) : "NA") << '\n';
  auto confusion = [&](const char* name, const Eigen::MatrixXi& m) {
    for (Eigen::Index row = 0; row < m.rows(); ++row) {
      out << name << ".true" << row + 1 << '=';
      for (Eigen::Index col = 0; col < m.cols(); ++col) out << (col ? " " : "") << m(row, col);
      out << '\n';
    }
  };
  confusion("bag_confusion", r.bag_confusion);
  if (r.instance_confusion) confusion("instance_confusion", *r.instance_confusion);
  for (const auto& p : r.predictions) {
    out << "fold=" << p.bag_index << ',' << p.bag_id << ",true=" << p.true_label;
    if (p.degenerate)
      out << ",degenerate\n";
    else
      out << ",predicted=" << p.predicted_label << '\n';
  }
  for (const auto& w : r.warnings) out << "warning=" << w << '\n';
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::kIo, "cannot write '" + tmp.string() + "'");
    os << content;
    if (!os) throw Error(ErrorKind::kIo, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot rename onto '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace genmil
