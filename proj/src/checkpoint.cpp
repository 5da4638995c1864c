#include "switchcert/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "switchcert/errors.hpp"

namespace switchcert {

namespace {

using nlohmann::json;

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

json box_json(const CompactBox& b) { return {{"lo", vec_json(b.lo())}, {"hi", vec_json(b.hi())}}; }

CompactBox json_box(const json& j) { return CompactBox(json_vec(j.at("lo")), json_vec(j.at("hi"))); }

}  // namespace

json mlp_to_json(const Mlp& net) {
  json layers = json::array();
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const Mat& w = net.weights()[k];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    layers.push_back({{"weights", flat}, {"bias", vec_json(net.biases()[k])}});
  }
  return {{"sizes", net.sizes()}, {"activation", to_string(net.activation())}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  Mlp net(j.at("sizes").get<std::vector<int>>(), activation_from_string(j.at("activation").get<std::string>()));
  const json& layers = j.at("layers");
  if (layers.size() != net.layer_count()) throw ConfigError("checkpoint: layer count mismatch");
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    Mat& w = net.weights()[k];
    const auto flat = layers[k].at("weights").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(w.size())) throw ConfigError("checkpoint: weight shape mismatch");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[i++];
    }
    const Vec b = json_vec(layers[k].at("bias"));
    if (b.size() != net.biases()[k].size()) throw ConfigError("checkpoint: bias shape mismatch");
    net.biases()[k] = b;
  }
  net.validate();
  return net;
}

json bundle_to_json(const CertificateBundle& bundle) {
  json j;
  j["format"] = "switchcert-bundle";
  j["version"] = 1;
  j["config_hash"] = bundle.config_hash;
  j["shared_v"] = bundle.shared_v;
  j["reference"] = vec_json(bundle.reference);
  j["barrier_box"] = box_json(bundle.barrier.box());
  json modes = json::array();
  for (std::size_t p = 0; p < bundle.mode_count(); ++p) {
    const ModeCertificateParams& mp = bundle.params[p];
    const Controller& c = bundle.controllers[p];
    const LipschitzCertificate lv = bundle.lyapunov_certificate(p);
    const LipschitzCertificate lc = bundle.controller_certificate(p);
    modes.push_back({
        {"k1", mp.k.k1}, {"k2", mp.k.k2}, {"kw", mp.k.kw},
        {"gamma1", mp.k.gamma1}, {"gamma2", mp.k.gamma2}, {"gammaw", mp.k.gammaw},
        {"kappa", mp.kappa}, {"mu", mp.mu},
        {"controller", mlp_to_json(c.net())},
        {"input_box", c.input_box() ? box_json(*c.input_box()) : json(nullptr)},
        {"certificates", {{"lyapunov_function", lv.function_bound},
                          {"lyapunov_jacobian", lv.jacobian_bound},
                          {"controller_function", lc.function_bound},
                          {"method", lv.method}}},
    });
  }
  j["modes"] = modes;
  json nets = json::array();
  for (const Mlp& v : bundle.lyapunov) nets.push_back(mlp_to_json(v));
  j["lyapunov"] = nets;
  return j;
}

CertificateBundle bundle_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "switchcert-bundle" || j.at("version").get<int>() != 1) {
      throw ConfigError("checkpoint: unsupported format");
    }
    CertificateBundle b;
    b.config_hash = j.at("config_hash").get<std::string>();
    b.shared_v = j.at("shared_v").get<bool>();
    b.reference = json_vec(j.at("reference"));
    b.barrier = ProductBarrier(json_box(j.at("barrier_box")));
    for (const json& m : j.at("modes")) {
      ModeCertificateParams mp;
      mp.k.k1 = m.at("k1").get<double>();
      mp.k.k2 = m.at("k2").get<double>();
      mp.k.kw = m.at("kw").get<double>();
      mp.k.gamma1 = m.at("gamma1").get<double>();
      mp.k.gamma2 = m.at("gamma2").get<double>();
      mp.k.gammaw = m.at("gammaw").get<double>();
      mp.kappa = m.at("kappa").get<double>();
      mp.mu = m.at("mu").get<double>();
      b.params.push_back(mp);
      std::optional<CompactBox> ubox;
      if (!m.at("input_box").is_null()) ubox = json_box(m.at("input_box"));
      b.controllers.emplace_back(mlp_from_json(m.at("controller")), b.reference, ubox);
    }
    for (const json& v : j.at("lyapunov")) b.lyapunov.push_back(mlp_from_json(v));
    b.validate();
    return b;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed bundle: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("checkpoint: invalid bundle: ") + e.what());
  }
}

void save_bundle(const CertificateBundle& bundle, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("checkpoint: cannot write '" + path + "'");
  out << bundle_to_json(bundle).dump(1) << '\n';
}

CertificateBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint: '" + path + "' is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace switchcert
