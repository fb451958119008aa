#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace coordiff {

namespace {

using nlohmann::json;

[[noreturn]] void syntax_error(const std::string& text, const json::parse_error& e) {
  // nlohmann reports a byte offset; convert it to line/column.
  std::size_t offset = std::min<std::size_t>(e.byte, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  std::ostringstream msg;
  msg << "config syntax error at line " << line << ", column " << col << ": " << e.what();
  throw ValidationError(msg.str());
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw ValidationError("config: unknown key '" + item.key() + "' in " + where);
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError("config: missing key '" + key + "' in " + where);
  if (!obj.at(key).is_number())
    throw ValidationError("config: '" + key + "' in " + where + " must be a number");
  return obj.at(key).get<double>();
}

long get_integer(const json& obj, const std::string& key, long fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer())
    throw ValidationError("config: '" + key + "' in " + where + " must be an integer");
  return obj.at(key).get<long>();
}

// A per-agent real field is a scalar (broadcast), an array of length N, or a
// draw spec {"uniform": [lo, hi], "seed": s}.
Eigen::VectorXd per_agent_values(const json& spec, int n, const std::string& where,
                                 std::uint64_t default_seed, std::uint32_t draw_index) {
  Eigen::VectorXd out(n);
  if (spec.is_number()) {
    out.setConstant(spec.get<double>());
    return out;
  }
  if (spec.is_array()) {
    if (static_cast<int>(spec.size()) != n)
      throw ValidationError("config: " + where + " must hold one value per agent");
    for (int k = 0; k < n; ++k) {
      if (!spec[k].is_number())
        throw ValidationError("config: " + where + " entries must be numbers");
      out(k) = spec[k].get<double>();
    }
    return out;
  }
  if (spec.is_object()) {
    check_keys(spec, {"uniform", "seed"}, where);
    if (!spec.contains("uniform") || !spec.at("uniform").is_array() ||
        spec.at("uniform").size() != 2)
      throw ValidationError("config: " + where + " draw spec needs \"uniform\": [lo, hi]");
    const double lo = spec.at("uniform")[0].get<double>();
    const double hi = spec.at("uniform")[1].get<double>();
    if (!(lo < hi)) throw ValidationError("config: " + where + " uniform range must have lo < hi");
    const std::uint64_t seed =
        spec.contains("seed") ? spec.at("seed").get<std::uint64_t>() : default_seed;
    auto rng = make_stream(seed, 0, draw_index, StreamTag::scenario);
    std::uniform_real_distribution<double> unif(lo, hi);
    for (int k = 0; k < n; ++k) out(k) = unif(rng);
    return out;
  }
  throw ValidationError("config: " + where + " must be a number, array, or draw spec");
}

Eigen::VectorXd vector_field(const json& spec, int dim, const std::string& where,
                             std::uint64_t default_seed, std::uint32_t draw_index) {
  if (spec.is_array()) {
    if (static_cast<int>(spec.size()) != dim)
      throw ValidationError("config: " + where + " must have length " + std::to_string(dim));
    Eigen::VectorXd out(dim);
    for (int j = 0; j < dim; ++j) out(j) = spec[j].get<double>();
    return out;
  }
  if (spec.is_object()) {
    check_keys(spec, {"gaussian", "seed"}, where);
    const std::uint64_t seed =
        spec.contains("seed") ? spec.at("seed").get<std::uint64_t>() : default_seed;
    auto rng = make_stream(seed, 0, draw_index, StreamTag::scenario);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd out(dim);
    for (int j = 0; j < dim; ++j) out(j) = gauss(rng);
    return out;
  }
  throw ValidationError("config: " + where + " must be an array or {\"gaussian\": true} spec");
}

Eigen::MatrixXd matrix_field(const json& spec, int rows, int cols, const std::string& where) {
  if (!spec.is_array() || static_cast<int>(spec.size()) != rows)
    throw ValidationError("config: " + where + " must be a " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " row-major array of arrays");
  Eigen::MatrixXd out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = spec[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw ValidationError("config: " + where + " row " + std::to_string(i) +
                            " must have length " + std::to_string(cols));
    for (int j = 0; j < cols; ++j) out(i, j) = row[j].get<double>();
  }
  return out;
}

Topology parse_topology(const json& spec, int n) {
  check_keys(spec, {"type", "connect_prob", "seed", "neighborhoods"}, "network.topology");
  if (!spec.contains("type") || !spec.at("type").is_string())
    throw ValidationError("config: network.topology needs a string \"type\"");
  const std::string type = spec.at("type").get<std::string>();
  if (type == "full") return full_topology(n);
  if (type == "path") return path_topology(n);
  if (type == "random") {
    const double prob = require_number(spec, "connect_prob", "network.topology");
    const auto seed =
        static_cast<std::uint64_t>(get_integer(spec, "seed", 1, "network.topology"));
    return random_topology(n, prob, seed);
  }
  if (type == "explicit") {
    if (!spec.contains("neighborhoods") || !spec.at("neighborhoods").is_array())
      throw ValidationError("config: explicit topology needs \"neighborhoods\"");
    Topology topology;
    topology.agent_count = n;
    for (const auto& row : spec.at("neighborhoods")) {
      std::vector<int> nb;
      for (const auto& v : row) nb.push_back(v.get<int>());
      topology.neighborhoods.push_back(std::move(nb));
    }
    topology.validate();
    if (static_cast<int>(topology.neighborhoods.size()) != n)
      throw ValidationError("config: neighborhoods must list every agent");
    return topology;
  }
  throw ValidationError("config: unknown topology type '" + type + "'");
}

CombinationRule parse_rule(const json& obj, const std::string& key, CombinationRule fallback) {
  if (!obj.contains(key)) return fallback;
  const std::string rule = obj.at(key).get<std::string>();
  if (rule == "identity") return CombinationRule::identity;
  if (rule == "averaging") return CombinationRule::averaging;
  if (rule == "metropolis") return CombinationRule::metropolis;
  throw ValidationError("config: unknown combination rule '" + rule + "'");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

Scenario parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    syntax_error(text, e);
  }
  check_keys(doc,
             {"name", "seed", "param_seed", "runs", "horizon", "threads", "metrics", "network",
              "risk"},
             "top level");

  Scenario s;
  if (doc.contains("name")) s.name = doc.at("name").get<std::string>();
  s.seed = static_cast<std::uint64_t>(get_integer(doc, "seed", 1, "top level"));
  const std::uint64_t param_seed = static_cast<std::uint64_t>(
      get_integer(doc, "param_seed", static_cast<long>(s.seed), "top level"));
  s.runs = static_cast<int>(get_integer(doc, "runs", 200, "top level"));
  s.horizon = get_integer(doc, "horizon", 0, "top level");
  s.threads = static_cast<int>(get_integer(doc, "threads", 1, "top level"));
  if (doc.contains("metrics")) {
    if (!doc.at("metrics").is_array())
      throw ValidationError("config: metrics must be an array");
    s.record_er = false;
    for (const auto& m : doc.at("metrics")) {
      const std::string name = m.get<std::string>();
      if (name == "er")
        s.record_er = true;
      else if (name != "msd")
        throw ValidationError("config: unknown metric '" + name + "'");
    }
  }

  if (!doc.contains("network")) throw ValidationError("config: missing \"network\" section");
  const json& net = doc.at("network");
  check_keys(net,
             {"agents", "topology", "a1_rule", "a2_rule", "a1_matrix", "a2_matrix", "mu", "r"},
             "network");
  const int n = static_cast<int>(get_integer(net, "agents", 0, "network"));
  if (n < 1) throw ValidationError("config: network.agents must be a positive integer");
  s.topology = net.contains("topology") ? parse_topology(net.at("topology"), n)
                                        : full_topology(n);
  s.A1 = net.contains("a1_matrix")
             ? matrix_field(net.at("a1_matrix"), n, n, "network.a1_matrix")
             : build_combination_matrix(s.topology,
                                        parse_rule(net, "a1_rule", CombinationRule::identity));
  s.A2 = net.contains("a2_matrix")
             ? matrix_field(net.at("a2_matrix"), n, n, "network.a2_matrix")
             : build_combination_matrix(s.topology,
                                        parse_rule(net, "a2_rule", CombinationRule::metropolis));
  if (net.contains("a1_matrix")) validate_combination_matrix(s.A1, s.topology);
  if (net.contains("a2_matrix")) validate_combination_matrix(s.A2, s.topology);
  if (!net.contains("mu")) throw ValidationError("config: missing network.mu");
  s.mu = per_agent_values(net.at("mu"), n, "network.mu", param_seed, 1);
  for (int k = 0; k < n; ++k)
    if (!(s.mu(k) > 0.0))
      throw ValidationError("config: network.mu entries must be positive step-sizes");
  s.r = net.contains("r") ? per_agent_values(net.at("r"), n, "network.r", param_seed, 2)
                          : Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k)
    if (s.r(k) < 0.0 || s.r(k) >= 1.0)
      throw ValidationError(
          "config: network.r entries are missing probabilities and must satisfy 0 <= r < 1");

  if (!doc.contains("risk")) throw ValidationError("config: missing \"risk\" section");
  const json& risk = doc.at("risk");
  if (!risk.contains("type") || !risk.at("type").is_string())
    throw ValidationError("config: risk.type must be \"mse\" or \"logistic\"");
  const std::string type = risk.at("type").get<std::string>();
  if (type == "mse") {
    check_keys(risk, {"type", "dim", "w_star", "covariance", "sigma_v2"}, "risk");
    s.kind = RiskKind::mse;
    s.dim = static_cast<int>(get_integer(risk, "dim", 0, "risk"));
    if (s.dim < 1) throw ValidationError("config: risk.dim must be a positive integer");
    if (!risk.contains("w_star")) throw ValidationError("config: missing risk.w_star");
    s.w_star = vector_field(risk.at("w_star"), s.dim, "risk.w_star", param_seed, 3);
    if (!risk.contains("covariance"))
      throw ValidationError("config: missing risk.covariance");
    const json& cov = risk.at("covariance");
    check_keys(cov, {"ar1_pi", "diagonal", "matrices", "seed"}, "risk.covariance");
    const int forms = cov.contains("ar1_pi") + cov.contains("diagonal") + cov.contains("matrices");
    if (forms != 1)
      throw ValidationError(
          "config: risk.covariance needs exactly one of ar1_pi, diagonal, matrices");
    if (cov.contains("ar1_pi")) {
      const Eigen::VectorXd pis =
          per_agent_values(cov.at("ar1_pi"), n, "risk.covariance.ar1_pi", param_seed, 4);
      for (int k = 0; k < n; ++k)
        if (!(std::abs(pis(k)) < 1.0))
          throw ValidationError("config: AR(1) parameters must satisfy |pi| < 1");
      s.ar1_pi.assign(pis.data(), pis.data() + n);
    } else if (cov.contains("diagonal")) {
      const std::uint64_t seed = cov.contains("seed")
                                     ? cov.at("seed").get<std::uint64_t>()
                                     : param_seed;
      for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd powers = per_agent_values(
            cov.at("diagonal"), s.dim, "risk.covariance.diagonal", seed,
            100 + static_cast<std::uint32_t>(k));
        for (int j = 0; j < s.dim; ++j)
          if (!(powers(j) > 0.0))
            throw ValidationError("config: covariance diagonal entries must be positive");
        s.ru.push_back(powers.asDiagonal());
        // explicit per-entry arrays are shared across agents; draw specs re-draw per agent
        if (!cov.at("diagonal").is_object() && k == 0) {
          s.ru.assign(n, Eigen::MatrixXd(powers.asDiagonal()));
          break;
        }
      }
    } else {
      const json& mats = cov.at("matrices");
      if (!mats.is_array() || static_cast<int>(mats.size()) != n)
        throw ValidationError("config: risk.covariance.matrices must list one matrix per agent");
      for (int k = 0; k < n; ++k)
        s.ru.push_back(matrix_field(mats[k], s.dim, s.dim,
                                    "risk.covariance.matrices[" + std::to_string(k) + "]"));
    }
    if (!risk.contains("sigma_v2")) throw ValidationError("config: missing risk.sigma_v2");
    s.sigma_v2 = per_agent_values(risk.at("sigma_v2"), n, "risk.sigma_v2", param_seed, 5);
    for (int k = 0; k < n; ++k)
      if (!(s.sigma_v2(k) > 0.0))
        throw ValidationError("config: risk.sigma_v2 entries must be positive variances");
  } else if (type == "logistic") {
    check_keys(risk, {"type", "dim", "w_true", "rho", "calibration_size", "calibration_seed"},
               "risk");
    s.kind = RiskKind::logistic;
    s.dim = static_cast<int>(get_integer(risk, "dim", 0, "risk"));
    if (s.dim < 1) throw ValidationError("config: risk.dim must be a positive integer");
    if (!risk.contains("w_true")) throw ValidationError("config: missing risk.w_true");
    s.w_star = vector_field(risk.at("w_true"), s.dim, "risk.w_true", param_seed, 6);
    s.rho = risk.contains("rho") ? require_number(risk, "rho", "risk") : 0.01;
    if (!(s.rho > 0.0)) throw ValidationError("config: risk.rho must be positive");
    s.calibration_size = get_integer(risk, "calibration_size", 100000, "risk");
    s.calibration_seed = static_cast<std::uint64_t>(
        get_integer(risk, "calibration_seed", static_cast<long>(param_seed), "risk"));
  } else {
    throw ValidationError("config: unknown risk type '" + type + "'");
  }

  s.validate();
  return s;
}

Scenario parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_scenario(const Scenario& scenario) {
  json doc;
  doc["name"] = scenario.name;
  doc["seed"] = scenario.seed;
  doc["runs"] = scenario.runs;
  doc["horizon"] = scenario.horizon;
  doc["threads"] = scenario.threads;
  doc["metrics"] = scenario.record_er ? json::array({"msd", "er"}) : json::array({"msd"});

  json net;
  net["agents"] = scenario.agents();
  json topo;
  topo["type"] = "explicit";
  topo["neighborhoods"] = scenario.topology.neighborhoods;
  net["topology"] = topo;
  net["a1_matrix"] = matrix_to_json(scenario.A1);
  net["a2_matrix"] = matrix_to_json(scenario.A2);
  net["mu"] = vector_to_json(scenario.mu);
  net["r"] = vector_to_json(scenario.r);
  doc["network"] = net;

  json risk;
  if (scenario.kind == RiskKind::mse) {
    risk["type"] = "mse";
    risk["dim"] = scenario.dim;
    risk["w_star"] = vector_to_json(scenario.w_star);
    json cov;
    if (!scenario.ar1_pi.empty()) {
      cov["ar1_pi"] = scenario.ar1_pi;
    } else {
      json mats = json::array();
      for (const auto& ru : scenario.ru) mats.push_back(matrix_to_json(ru));
      cov["matrices"] = mats;
    }
    risk["covariance"] = cov;
    risk["sigma_v2"] = vector_to_json(scenario.sigma_v2);
  } else {
    risk["type"] = "logistic";
    risk["dim"] = scenario.dim;
    risk["w_true"] = vector_to_json(scenario.w_star);
    risk["rho"] = scenario.rho;
    risk["calibration_size"] = scenario.calibration_size;
    risk["calibration_seed"] = scenario.calibration_seed;
  }
  doc["risk"] = risk;
  return doc.dump(2) + "\n";
}

}  // namespace coordiff
