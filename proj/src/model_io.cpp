#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "cnoma/gdbn.hpp"

namespace cnoma::gdbn {

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); i++) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); i++) v(static_cast<int>(i)) = a[i].get<double>();
  return v;
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); i++) {
    json row = json::array();
    for (int j = 0; j < m.cols(); j++) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from(const json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; i++)
    for (int j = 0; j < c; j++) m(i, j) = rows[i][j].get<double>();
  return m;
}

json class_json(const ClassModel& cm) {
  json clusters = json::array();
  for (const auto& c : cm.vocab.clusters)
    clusters.push_back({{"mean_value", vec_json(c.mean.value)},
                        {"mean_derivative", vec_json(c.mean.derivative)},
                        {"covariance", mat_json(c.covariance)}});
  json j;
  j["clusters"] = clusters;
  j["feature_mean"] = vec_json(cm.feature_mean);
  j["feature_cov"] = mat_json(cm.feature_cov);
  j["transition"] = mat_json(cm.transitions.single);
  json coupled = json::array();
  for (const auto& r : cm.transitions.coupled.rows) coupled.push_back(mat_json(r));
  j["coupled_transition"] = coupled;
  j["dynamics"] = {{"dynamic", mat_json(cm.dynamics.dynamic)},
                   {"control", mat_json(cm.dynamics.control)},
                   {"process_noise", mat_json(cm.dynamics.process_noise)},
                   {"observation", mat_json(cm.dynamics.observation)},
                   {"observation_noise", mat_json(cm.dynamics.observation_noise)}};
  return j;
}

ClassModel class_from(const json& j) {
  ClassModel cm;
  for (const auto& c : j.at("clusters")) {
    Cluster cl;
    cl.mean.value = vec_from(c.at("mean_value"));
    cl.mean.derivative = vec_from(c.at("mean_derivative"));
    cl.covariance = mat_from(c.at("covariance"));
    cm.vocab.clusters.push_back(std::move(cl));
  }
  cm.vocab.refresh_cache();
  cm.feature_mean = vec_from(j.at("feature_mean"));
  cm.feature_cov = mat_from(j.at("feature_cov"));
  cm.transitions.single = mat_from(j.at("transition"));
  for (const auto& r : j.at("coupled_transition"))
    cm.transitions.coupled.rows.push_back(mat_from(r));
  const auto& d = j.at("dynamics");
  cm.dynamics.dynamic = mat_from(d.at("dynamic"));
  cm.dynamics.control = mat_from(d.at("control"));
  cm.dynamics.process_noise = mat_from(d.at("process_noise"));
  cm.dynamics.observation = mat_from(d.at("observation"));
  cm.dynamics.observation_noise = mat_from(d.at("observation_noise"));
  return cm;
}

}  // namespace

void GenerativeModel::save(const std::string& path) const {
  json j;
  j["version"] = version;
  j["encoder"] = {{"block_len", encoder.block_len}, {"power_floor", encoder.power_floor}};
  j["static_filter"] = {{"process_noise", static_filter.process_noise},
                        {"observation_noise", static_filter.observation_noise},
                        {"dt", static_filter.dt}};
  j["noise"] = class_json(noise);
  j["pu"] = class_json(pu);
  j["su"] = class_json(su);
  json chains = json::array();
  for (const auto& m : t_pu) chains.push_back({m(0, 0), m(0, 1), m(1, 0), m(1, 1)});
  j["t_pu"] = chains;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(1) << '\n';
}

GenerativeModel GenerativeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  GenerativeModel m;
  m.version = j.at("version").get<int>();
  if (m.version != 1) throw std::runtime_error("unsupported model version");
  m.encoder.block_len = j.at("encoder").at("block_len").get<int>();
  m.encoder.power_floor = j.at("encoder").at("power_floor").get<double>();
  m.static_filter.process_noise = j.at("static_filter").at("process_noise").get<double>();
  m.static_filter.observation_noise = j.at("static_filter").at("observation_noise").get<double>();
  m.static_filter.dt = j.at("static_filter").at("dt").get<double>();
  m.noise = class_from(j.at("noise"));
  m.pu = class_from(j.at("pu"));
  m.su = class_from(j.at("su"));
  for (const auto& c : j.at("t_pu")) {
    Eigen::Matrix2d t;
    t << c[0].get<double>(), c[1].get<double>(), c[2].get<double>(), c[3].get<double>();
    m.t_pu.push_back(t);
  }
  return m;
}

}  // namespace cnoma::gdbn
