#include "navgym/net.hpp"

namespace navgym {

namespace {

int conv_chain_features(const std::vector<ConvSpec>& chain, std::vector<int> shape) {
  int cin = 1;
  int cells = 1;
  for (const auto& cs : chain) {
    for (auto& d : shape) {
      d = ConvNd<float>::out_dim(d, cs.kernel, cs.stride, cs.pad);
      if (d < 1)
        throw ValidationError("conv layer output collapses to zero cells (kernel " +
                              std::to_string(cs.kernel) + " does not fit)");
    }
    cin = cs.channels;
  }
  for (int d : shape) cells *= d;
  return cin * cells;
}

}  // namespace

int NetworkSpec::conv_feature_count(bool three_d) const {
  if (three_d)
    return conv3d.empty() ? occ_dims[0] * occ_dims[1] * occ_dims[2]
                          : conv_chain_features(conv3d, {occ_dims[0], occ_dims[1], occ_dims[2]});
  return conv2d.empty() ? depth_dims[0] * depth_dims[1]
                        : conv_chain_features(conv2d, {depth_dims[0], depth_dims[1]});
}

int NetworkSpec::feature_dim() const {
  return conv_feature_count(true) + conv_feature_count(false) + abs_hidden + scalar_dim;
}

int NetworkSpec::embed_dim() const {
  if (lstm_hidden > 0) return lstm_hidden;
  if (!trunk.empty()) return trunk.back();
  return feature_dim();
}

void NetworkSpec::validate() const {
  for (int d : occ_dims)
    if (d < 1) throw ValidationError("occ_dims must be >= 1");
  for (int d : depth_dims)
    if (d < 1) throw ValidationError("depth_dims must be >= 1");
  for (size_t i = 0; i < conv3d.size(); ++i)
    if (conv3d[i].channels < 1 || conv3d[i].kernel < 1 || conv3d[i].stride < 1 ||
        conv3d[i].pad < 0)
      throw ValidationError("conv3d layer " + std::to_string(i) + " malformed");
  for (size_t i = 0; i < conv2d.size(); ++i)
    if (conv2d[i].channels < 1 || conv2d[i].kernel < 1 || conv2d[i].stride < 1 ||
        conv2d[i].pad < 0)
      throw ValidationError("conv2d layer " + std::to_string(i) + " malformed");
  if (abs_dim < 1 || abs_hidden < 1) throw ValidationError("abs extractor dims must be >= 1");
  if (scalar_dim < 1) throw ValidationError("scalar_dim must be >= 1");
  if (trunk.empty()) throw ValidationError("trunk must have at least one layer");
  for (int w : trunk)
    if (w < 1) throw ValidationError("trunk widths must be >= 1");
  if (lstm_hidden < 0) throw ValidationError("lstm_hidden must be >= 0");
  if (action_dim < 1) throw ValidationError("action_dim must be >= 1");
  if (policy_hidden < 1 || q_hidden < 1) throw ValidationError("head widths must be >= 1");
  // Trip the conv shape checks now rather than at forward time.
  (void)feature_dim();
}

void to_json(nlohmann::json& j, const NetworkSpec& s) {
  auto conv_to_json = [](const std::vector<ConvSpec>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : v)
      a.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride},
                   {"pad", c.pad}});
    return a;
  };
  j = nlohmann::json{{"occ_dims", s.occ_dims},
                     {"conv3d", conv_to_json(s.conv3d)},
                     {"depth_dims", s.depth_dims},
                     {"conv2d", conv_to_json(s.conv2d)},
                     {"abs_dim", s.abs_dim},
                     {"abs_hidden", s.abs_hidden},
                     {"scalar_dim", s.scalar_dim},
                     {"trunk", s.trunk},
                     {"lstm_hidden", s.lstm_hidden},
                     {"action_dim", s.action_dim},
                     {"policy_hidden", s.policy_hidden},
                     {"q_hidden", s.q_hidden}};
}

void from_json(const nlohmann::json& j, NetworkSpec& s) {
  auto conv_from_json = [](const nlohmann::json& a) {
    std::vector<ConvSpec> v;
    for (const auto& c : a)
      v.push_back(ConvSpec{c.at("channels").get<int>(), c.at("kernel").get<int>(),
                           c.at("stride").get<int>(), c.at("pad").get<int>()});
    return v;
  };
  j.at("occ_dims").get_to(s.occ_dims);
  s.conv3d = conv_from_json(j.at("conv3d"));
  j.at("depth_dims").get_to(s.depth_dims);
  s.conv2d = conv_from_json(j.at("conv2d"));
  j.at("abs_dim").get_to(s.abs_dim);
  j.at("abs_hidden").get_to(s.abs_hidden);
  j.at("scalar_dim").get_to(s.scalar_dim);
  j.at("trunk").get_to(s.trunk);
  j.at("lstm_hidden").get_to(s.lstm_hidden);
  j.at("action_dim").get_to(s.action_dim);
  j.at("policy_hidden").get_to(s.policy_hidden);
  j.at("q_hidden").get_to(s.q_hidden);
}

}  // namespace navgym
