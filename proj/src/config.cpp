#include "decoil/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "decoil/error.hpp"
#include "json.hpp"

namespace decoil {

using nlohmann::ordered_json;

namespace {

std::string layer_tag(std::size_t i) { return "layer " + std::to_string(i) + ": "; }

}  // namespace

Dims output_dims(const Dims& in, const LayerSpec& layer) {
  Dims out;
  if (const auto* c = std::get_if<ConvSpec>(&layer)) {
    const int h = in.height + 2 * c->pad - c->kernel;
    const int w = in.width + 2 * c->pad - c->kernel;
    if (h < 0 || w < 0) {
      throw GeometryError("convolution window " + std::to_string(c->kernel) +
                          " exceeds padded input " + std::to_string(in.height + 2 * c->pad) + "x" +
                          std::to_string(in.width + 2 * c->pad));
    }
    out = {h / c->stride + 1, w / c->stride + 1, c->filters};
  } else {
    const auto& p = std::get<PoolSpec>(layer);
    if (in.height < p.window || in.width < p.window) {
      throw GeometryError("pooling window " + std::to_string(p.window) + " exceeds input " +
                          std::to_string(in.height) + "x" + std::to_string(in.width));
    }
    out = {(in.height - p.window) / p.stride + 1, (in.width - p.window) / p.stride + 1, in.depth};
  }
  return out;
}

std::vector<Dims> chain_dims(const NetworkSpec& net) {
  std::vector<Dims> dims{net.input};
  dims.reserve(net.layers.size() + 1);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    try {
      dims.push_back(output_dims(dims.back(), net.layers[i]));
    } catch (const GeometryError& e) {
      throw GeometryError(layer_tag(i) + e.what(), i);
    }
  }
  return dims;
}

std::vector<int> conv_ordinals(const NetworkSpec& net) {
  std::vector<int> ord;
  int next = 0;
  for (const auto& l : net.layers) ord.push_back(is_conv(l) ? next++ : -1);
  return ord;
}

std::size_t conv_count(const NetworkSpec& net) {
  std::size_t n = 0;
  for (const auto& l : net.layers) n += is_conv(l);
  return n;
}

void validate_network(const NetworkSpec& net) {
  const auto& in = net.input;
  if (in.height < 1 || in.width < 1 || in.depth < 1) {
    throw ValidationError("input dims must all be >= 1");
  }
  const auto& f = net.format;
  if (f.fraction_bits < 0 || f.integer_bits < 1 || f.integer_bits + f.fraction_bits != 32) {
    throw ValidationError("fixed_point: int_bits + frac_bits must equal 32 with frac_bits >= 0");
  }
  if (net.layers.empty()) throw ValidationError("layers nonempty: network has no layers");

  Dims cur = in;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    if (const auto* c = std::get_if<ConvSpec>(&layer)) {
      if (c->kernel < 1 || c->kernel % 2 == 0) {
        throw ValidationError(layer_tag(i) + "kernel must be odd and >= 1", i);
      }
      if (c->filters < 1) throw ValidationError(layer_tag(i) + "filters must be >= 1", i);
      if (c->stride < 1) throw ValidationError(layer_tag(i) + "stride must be >= 1", i);
      if (c->pad < 0 || c->pad > c->kernel - 1) {
        throw ValidationError(layer_tag(i) + "pad must lie in [0, kernel-1]", i);
      }
      if (c->in_depth && *c->in_depth != cur.depth) {
        throw ValidationError(layer_tag(i) + "depth chaining: declared input depth " +
                                  std::to_string(*c->in_depth) + " but preceding output depth is " +
                                  std::to_string(cur.depth),
                              i);
      }
      if (c->dpar && (*c->dpar < 1 || *c->dpar > cur.depth || cur.depth % *c->dpar != 0)) {
        throw ValidationError(layer_tag(i) + "dpar must divide the input depth " +
                                  std::to_string(cur.depth),
                              i);
      }
    } else {
      const auto& p = std::get<PoolSpec>(layer);
      if (p.window < 1) throw ValidationError(layer_tag(i) + "pool window must be >= 1", i);
      if (p.stride < 1) throw ValidationError(layer_tag(i) + "pool stride must be >= 1", i);
    }
    try {
      cur = output_dims(cur, layer);
    } catch (const GeometryError& e) {
      throw GeometryError(layer_tag(i) + e.what(), i);
    }
  }
}

// --- document ----------------------------------------------------------------

namespace {

int get_int(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + "missing field \"" + key + "\"");
  if (!it->is_number_integer()) throw ValidationError(where + "field \"" + key + "\" must be an integer");
  const auto v = it->get<std::int64_t>();
  if (v < INT32_MIN || v > INT32_MAX) throw ValidationError(where + "field \"" + key + "\" out of range");
  return static_cast<int>(v);
}

void reject_unknown(const ordered_json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where, std::optional<std::size_t> layer = std::nullopt) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ValidationError(where + "unknown field \"" + it.key() + "\"", layer);
  }
}

LayerSpec parse_layer(const ordered_json& j, std::size_t i) {
  const std::string where = layer_tag(i);
  if (!j.is_object()) throw ValidationError(where + "layer must be an object", i);
  auto t = j.find("type");
  if (t == j.end() || !t->is_string()) throw ValidationError(where + "missing string field \"type\"", i);
  try {
    if (*t == "conv") {
      reject_unknown(j, {"type", "kernel", "filters", "stride", "pad", "relu", "in_depth", "dpar"},
                     where, i);
      ConvSpec c;
      c.kernel = get_int(j, "kernel", where);
      c.filters = get_int(j, "filters", where);
      c.stride = j.contains("stride") ? get_int(j, "stride", where) : 1;
      c.pad = j.contains("pad") ? get_int(j, "pad", where) : 0;
      if (auto r = j.find("relu"); r != j.end()) {
        if (!r->is_boolean()) throw ValidationError(where + "field \"relu\" must be a boolean", i);
        c.relu = r->get<bool>();
      }
      if (j.contains("in_depth")) c.in_depth = get_int(j, "in_depth", where);
      if (j.contains("dpar")) c.dpar = get_int(j, "dpar", where);
      return c;
    }
    if (*t == "maxpool") {
      reject_unknown(j, {"type", "window", "stride"}, where, i);
      PoolSpec p;
      p.window = get_int(j, "window", where);
      p.stride = j.contains("stride") ? get_int(j, "stride", where) : p.window;
      return p;
    }
  } catch (const ValidationError& e) {
    if (e.layer()) throw;
    throw ValidationError(e.what(), i);
  }
  throw ValidationError(where + "unknown layer type \"" + t->get<std::string>() + "\"", i);
}

}  // namespace

NetworkSpec parse_network(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("network document syntax error at byte ") + std::to_string(e.byte) +
                         ": " + e.what(),
                     e.byte);
  }
  if (!doc.is_object()) throw ValidationError("network document must be an object");
  reject_unknown(doc, {"input", "fixed_point", "layers"}, "");

  NetworkSpec net;
  auto in = doc.find("input");
  if (in == doc.end() || !in->is_object()) throw ValidationError("missing object \"input\"");
  reject_unknown(*in, {"h", "w", "d"}, "input: ");
  net.input = {get_int(*in, "h", "input: "), get_int(*in, "w", "input: "), get_int(*in, "d", "input: ")};

  if (auto fp = doc.find("fixed_point"); fp != doc.end()) {
    if (!fp->is_object()) throw ValidationError("\"fixed_point\" must be an object");
    reject_unknown(*fp, {"int_bits", "frac_bits"}, "fixed_point: ");
    net.format = {get_int(*fp, "int_bits", "fixed_point: "), get_int(*fp, "frac_bits", "fixed_point: ")};
  }

  auto layers = doc.find("layers");
  if (layers == doc.end() || !layers->is_array()) throw ValidationError("missing array \"layers\"");
  for (std::size_t i = 0; i < layers->size(); ++i) net.layers.push_back(parse_layer((*layers)[i], i));

  validate_network(net);
  return net;
}

std::string serialize_network(const NetworkSpec& net) {
  ordered_json doc;
  doc["input"] = {{"h", net.input.height}, {"w", net.input.width}, {"d", net.input.depth}};
  doc["fixed_point"] = {{"int_bits", net.format.integer_bits}, {"frac_bits", net.format.fraction_bits}};
  doc["layers"] = ordered_json::array();
  for (const auto& layer : net.layers) {
    ordered_json j;
    if (const auto* c = std::get_if<ConvSpec>(&layer)) {
      j = {{"type", "conv"},     {"kernel", c->kernel}, {"filters", c->filters},
           {"stride", c->stride}, {"pad", c->pad},       {"relu", c->relu}};
      if (c->in_depth) j["in_depth"] = *c->in_depth;
      if (c->dpar) j["dpar"] = *c->dpar;
    } else {
      const auto& p = std::get<PoolSpec>(layer);
      j = {{"type", "maxpool"}, {"window", p.window}, {"stride", p.stride}};
    }
    doc["layers"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

NetworkSpec load_network(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open network file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_network(ss.str());
}

// --- plans ---------------------------------------------------------------------

std::vector<int> full_depth_parallel(const NetworkSpec& net) {
  const auto dims = chain_dims(net);
  std::vector<int> dp;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (is_conv(net.layers[i])) dp.push_back(dims[i].depth);
  }
  return dp;
}

std::vector<int> default_depth_parallel(const NetworkSpec& net) {
  auto dp = full_depth_parallel(net);
  std::size_t k = 0;
  for (const auto& l : net.layers) {
    if (const auto* c = std::get_if<ConvSpec>(&l)) {
      if (c->dpar) dp[k] = *c->dpar;
      ++k;
    }
  }
  return dp;
}

FusionPlan single_group_plan(const NetworkSpec& net) {
  return {{{0, net.layers.size() - 1}}, default_depth_parallel(net)};
}

FusionPlan singleton_plan(const NetworkSpec& net) {
  FusionPlan p;
  for (std::size_t i = 0; i < net.layers.size(); ++i) p.groups.push_back({i, i});
  p.depth_parallel = default_depth_parallel(net);
  return p;
}

int layer_dpar(const FusionPlan& plan, const NetworkSpec& net, std::size_t layer) {
  int ord = 0;
  for (std::size_t i = 0; i < layer; ++i) ord += is_conv(net.layers[i]);
  return plan.depth_parallel.at(static_cast<std::size_t>(ord));
}

void validate_plan(const FusionPlan& plan, const NetworkSpec& net) {
  const std::size_t n = net.layers.size();
  std::size_t expect = 0;
  for (const auto& g : plan.groups) {
    if (g.first > g.last) {
      throw ValidationError("plan group " + std::to_string(g.first) + "-" + std::to_string(g.last) +
                            " is reversed");
    }
    if (g.first < expect) {
      throw ValidationError("plan groups overlap at layer " + std::to_string(g.first));
    }
    if (g.first > expect) {
      throw ValidationError("plan groups are not contiguous: layer " + std::to_string(expect) +
                            " is not covered");
    }
    if (g.last >= n) {
      throw ValidationError("plan group ends at layer " + std::to_string(g.last) + " but network has " +
                            std::to_string(n) + " layers");
    }
    expect = g.last + 1;
  }
  if (expect != n) {
    throw ValidationError("plan does not cover layers " + std::to_string(expect) + ".." +
                          std::to_string(n - 1));
  }
  const auto full = full_depth_parallel(net);
  if (plan.depth_parallel.size() != full.size()) {
    throw ValidationError("dpar count mismatch: expected " + std::to_string(full.size()) +
                          " values (one per conv layer), got " +
                          std::to_string(plan.depth_parallel.size()));
  }
  for (std::size_t k = 0; k < full.size(); ++k) {
    const int dp = plan.depth_parallel[k];
    if (dp < 1 || dp > full[k] || full[k] % dp != 0) {
      throw ValidationError("dpar " + std::to_string(dp) + " for conv layer " + std::to_string(k) +
                            " does not divide its input depth " + std::to_string(full[k]));
    }
  }
}

namespace {

std::size_t parse_index(std::string_view s, std::size_t offset) {
  std::size_t v = 0;
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (s.empty() || ec != std::errc{} || ptr != e) {
    throw ParseError("plan expression: expected layer index at position " + std::to_string(offset),
                     offset);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

FusionPlan parse_plan(std::string_view expr, const NetworkSpec& net, std::optional<std::string_view> dpar) {
  FusionPlan plan;
  std::size_t offset = 0;
  for (auto group : split(expr, '|')) {
    const auto dash = group.find('-');
    if (dash == std::string_view::npos) {
      const auto i = parse_index(group, offset);
      plan.groups.push_back({i, i});
    } else {
      const auto a = parse_index(group.substr(0, dash), offset);
      const auto b = parse_index(group.substr(dash + 1), offset + dash + 1);
      plan.groups.push_back({a, b});
    }
    offset += group.size() + 1;
  }
  if (dpar) {
    std::size_t pos = 0;
    for (auto item : split(*dpar, ',')) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
        throw ParseError("dpar list: expected integer at position " + std::to_string(pos), pos);
      }
      plan.depth_parallel.push_back(v);
      pos += item.size() + 1;
    }
  } else {
    plan.depth_parallel = default_depth_parallel(net);
  }
  validate_plan(plan, net);
  return plan;
}

std::string plan_expression(const FusionPlan& plan) {
  std::string s;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    if (i) s += '|';
    const auto& g = plan.groups[i];
    s += std::to_string(g.first);
    if (g.last != g.first) s += '-' + std::to_string(g.last);
  }
  return s;
}

std::string dpar_expression(const FusionPlan& plan) {
  std::string s;
  for (std::size_t i = 0; i < plan.depth_parallel.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(plan.depth_parallel[i]);
  }
  return s;
}

}  // namespace decoil
