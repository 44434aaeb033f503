#include "decoil/dataflow.hpp"

#include <algorithm>
#include <limits>

#include "decoil/costmodel.hpp"
#include "decoil/error.hpp"
#include "decoil/fixedpoint.hpp"

namespace decoil::dataflow {

namespace {

int ceil_div(int a, int b) {
  // b > 0; rounds toward +inf for negative a too.
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

// Pairwise adder tree, level by level; an odd tail passes through to the next level.
std::int32_t tree_reduce(std::int32_t* v, int n, std::int64_t& sat_ops) {
  while (n > 1) {
    const int half = n / 2;
    for (int i = 0; i < half; ++i) {
      bool sat = false;
      v[i] = fx::add(v[2 * i], v[2 * i + 1], sat);
      sat_ops += sat;
    }
    if (n % 2) v[half] = v[n - 1];
    n = half + n % 2;
  }
  return n == 1 ? v[0] : 0;
}

}  // namespace

std::optional<Token> step(Stage& s, std::int64_t cycle, std::optional<Token> in) {
  const bool accept = in.has_value() && s.can_accept();
  std::optional<Token> out;
  if (s.has_output()) out = s.take();
  s.tick(cycle, accept ? &*in : nullptr);
  return out;
}

// --- Source / stream ---------------------------------------------------------

Source::Source(std::string name, const Tensor3D& t)
    : Stage(std::move(name)), t_(t), total_(t.dims().positions()) {}

Token Source::take() {
  const int w = t_.dims().width;
  Token tok{int(next_ / w), int(next_ % w), 0, {}};
  auto pos = t_.position(tok.row, tok.col);
  tok.values.reserve(pos.size());
  for (auto v : pos) tok.values.push_back(v.raw);
  ++next_;
  return tok;
}

std::vector<Token> stream_input(const Tensor3D& t) {
  Source src("src", t);
  std::vector<Token> out;
  out.reserve(std::size_t(t.dims().positions()));
  for (std::int64_t cycle = 1; src.has_output(); ++cycle) {
    if (auto tok = step(src, cycle, std::nullopt)) out.push_back(std::move(*tok));
  }
  return out;
}

Tensor3D collect_stream(std::span<const Token> stream, Dims dims) {
  if (std::int64_t(stream.size()) != dims.positions()) {
    throw ValidationError("stream carries " + std::to_string(stream.size()) + " elements, expected " +
                          std::to_string(dims.positions()));
  }
  Tensor3D t(dims);
  for (const auto& tok : stream) {
    if (int(tok.values.size()) != dims.depth) throw ValidationError("stream element depth mismatch");
    for (int ch = 0; ch < dims.depth; ++ch) t.at(tok.row, tok.col, ch).raw = tok.values[std::size_t(ch)];
  }
  return t;
}

// --- LineBuffer ----------------------------------------------------------------

LineBuffer::LineBuffer(std::string name, Dims in, int kernel, int stride, int pad)
    : Stage(std::move(name)), in_(in), kernel_(kernel), stride_(stride), pad_(pad),
      capacity_(std::int64_t{kernel} * (in.width + 2 * pad)) {
  ConvSpec geom;
  geom.kernel = kernel;
  geom.stride = stride;
  geom.pad = pad;
  geom.filters = in.depth;
  out_dims_ = output_dims(in, geom);
  store_.assign(std::size_t(capacity_ * in.depth), 0);
}

std::int64_t LineBuffer::oldest_needed() const {
  if (done_) return std::numeric_limits<std::int64_t>::max();
  const int r0 = std::max(0, next_row_ * stride_ - pad_);
  const int c0 = std::max(0, next_col_ * stride_ - pad_);
  std::int64_t oldest = std::int64_t{r0} * in_.width + c0;
  if (next_row_ + 1 < out_dims_.height) {
    const int r1 = std::max(0, (next_row_ + 1) * stride_ - pad_);
    oldest = std::min(oldest, std::int64_t{r1} * in_.width);
  }
  return oldest;
}

std::int64_t LineBuffer::latest_needed() const {
  const int lr = std::min(next_row_ * stride_ - pad_ + kernel_ - 1, in_.height - 1);
  const int lc = std::min(next_col_ * stride_ - pad_ + kernel_ - 1, in_.width - 1);
  return std::int64_t{lr} * in_.width + lc;
}

bool LineBuffer::can_accept() const {
  return received_ < in_.positions() && received_ - capacity_ < oldest_needed();
}

Token LineBuffer::take() {
  Token t = std::move(*out_);
  out_.reset();
  return t;
}

Token LineBuffer::assemble() const {
  const int d = in_.depth;
  Token tok{next_row_, next_col_, 0, std::vector<std::int32_t>(std::size_t(kernel_) * kernel_ * d, 0)};
  const int r0 = next_row_ * stride_ - pad_;
  const int c0 = next_col_ * stride_ - pad_;
  for (int i = 0; i < kernel_; ++i) {
    const int r = r0 + i;
    if (r < 0 || r >= in_.height) continue;
    for (int j = 0; j < kernel_; ++j) {
      const int c = c0 + j;
      if (c < 0 || c >= in_.width) continue;
      const std::int64_t idx = std::int64_t{r} * in_.width + c;
      if (idx >= received_ || idx < received_ - capacity_) {
        throw InvariantError(name() + ": window element evicted or not yet received");
      }
      const auto* src = store_.data() + (idx % capacity_) * d;
      std::copy(src, src + d, tok.values.begin() + (std::ptrdiff_t(i) * kernel_ + j) * d);
    }
  }
  return tok;
}

void LineBuffer::tick(std::int64_t, Token* in) {
  if (in) {
    if (in->row != int(received_ / in_.width) || in->col != int(received_ % in_.width) ||
        int(in->values.size()) != in_.depth) {
      throw InvariantError(name() + ": out-of-order or malformed stream element");
    }
    std::copy(in->values.begin(), in->values.end(), store_.begin() + (received_ % capacity_) * in_.depth);
    ++received_;
  }
  if (!out_ && !done_ && received_ > latest_needed()) {
    out_ = assemble();
    ++emitted_;
    if (++next_col_ == out_dims_.width) {
      next_col_ = 0;
      if (++next_row_ == out_dims_.height) done_ = true;
    }
  }
}

std::vector<std::vector<std::int32_t>> split_window(std::span<const std::int32_t> window, int kernel,
                                                    int depth) {
  const int taps = kernel * kernel;
  if (int(window.size()) != taps * depth) throw ValidationError("window size does not match w*w*d");
  std::vector<std::vector<std::int32_t>> planes(static_cast<std::size_t>(depth),
                                                std::vector<std::int32_t>(static_cast<std::size_t>(taps)));
  for (int t = 0; t < taps; ++t) {
    for (int ch = 0; ch < depth; ++ch) planes[std::size_t(ch)][std::size_t(t)] = window[std::size_t(t * depth + ch)];
  }
  return planes;
}

std::vector<std::int32_t> concat_planes(const std::vector<std::vector<std::int32_t>>& planes) {
  if (planes.empty()) return {};
  const std::size_t depth = planes.size();
  const std::size_t taps = planes.front().size();
  std::vector<std::int32_t> w(taps * depth);
  for (std::size_t ch = 0; ch < depth; ++ch) {
    if (planes[ch].size() != taps) throw ValidationError("planar windows differ in size");
    for (std::size_t t = 0; t < taps; ++t) w[t * depth + ch] = planes[ch][t];
  }
  return w;
}

// --- ConvEngine ----------------------------------------------------------------

ConvEngine::ConvEngine(std::string name, const ConvSpec& spec, int in_depth, int dpar,
                       const FilterBank& filters, FixedPointFormat fmt)
    : Stage(std::move(name)), spec_(spec), depth_(in_depth), dpar_(dpar), groups_(in_depth / dpar),
      filters_(spec.filters), taps_(spec.kernel * spec.kernel),
      latency_(int(cost::conv3d_latency(spec.kernel, dpar))), capacity_(std::size_t(latency_) + 1),
      bank_(filters), frac_(fmt.fraction_bits), acc_(std::size_t(spec.filters), 0),
      scratch_(std::size_t(taps_)), plane_sums_(std::size_t(dpar), 0) {
  if (dpar < 1 || in_depth % dpar != 0) throw ValidationError(this->name() + ": dpar must divide depth");
  if (filters.count() != spec.filters || filters.kernel() != spec.kernel || filters.depth() != in_depth) {
    throw ValidationError(this->name() + ": filter bank shape does not match layer");
  }
}

bool ConvEngine::has_space() const { return inflight_.size() + (out_ ? 1 : 0) < capacity_; }

bool ConvEngine::can_accept() const {
  return !cur_ || (cursor_ == issues_per_window() - 1 && has_space());
}

Token ConvEngine::take() {
  Token t = std::move(*out_);
  out_.reset();
  return t;
}

std::int32_t ConvEngine::compute(int group, int filter) {
  const std::int32_t* win = cur_->values.data();
  const FxValue* filt = bank_.values().data() + std::size_t(filter) * taps_ * depth_;
  for (int local = 0; local < dpar_; ++local) {
    const int ch = group * dpar_ + local;
    for (int t = 0; t < taps_; ++t) {
      bool sat = false;
      scratch_[std::size_t(t)] = fx::mul(win[t * depth_ + ch], filt[t * depth_ + ch].raw, frac_, sat);
      saturations_ += sat;
    }
    plane_sums_[std::size_t(local)] = tree_reduce(scratch_.data(), taps_, saturations_);
  }
  const std::int32_t partial = tree_reduce(plane_sums_.data(), dpar_, saturations_);
  auto& acc = acc_[std::size_t(filter)];
  if (group == 0) {
    acc = partial;
  } else {
    bool sat = false;
    acc = fx::add(acc, partial, sat);
    saturations_ += sat;
  }
  return acc;
}

void ConvEngine::tick(std::int64_t cycle, Token* in) {
  if (cur_ && has_space()) {
    const int group = cursor_ / filters_;
    const int f = cursor_ % filters_;
    const std::int32_t v = compute(group, f);
    ++issued_;
    const bool final = group == groups_ - 1;
    Pending p{cycle + latency_, final, {}};
    if (final) p.token = Token{cur_->row, cur_->col, f, {spec_.relu ? fx::relu(v) : v}};
    inflight_.push_back(std::move(p));
    if (++cursor_ == issues_per_window()) {
      cur_.reset();
      cursor_ = 0;
    }
  }
  if (in) {
    if (cur_) throw InvariantError(name() + ": window replaced mid sweep");
    if (int(in->values.size()) != taps_ * depth_) throw InvariantError(name() + ": malformed window");
    cur_ = std::move(*in);
    cursor_ = 0;
  }
  while (!inflight_.empty() && inflight_.front().ready <= cycle + 1) {
    if (!inflight_.front().emit) {
      inflight_.pop_front();
    } else if (!out_) {
      out_ = std::move(inflight_.front().token);
      inflight_.pop_front();
    } else {
      break;
    }
  }
}

// --- Assembler -------------------------------------------------------------------

Assembler::Assembler(std::string name, int filters) : Stage(std::move(name)), filters_(filters) {
  collecting_.values.assign(std::size_t(filters), 0);
}

Token Assembler::take() {
  Token t = std::move(*out_);
  out_.reset();
  return t;
}

void Assembler::tick(std::int64_t, Token* in) {
  if (in) {
    if (in->aux != count_ || (count_ > 0 && (in->row != collecting_.row || in->col != collecting_.col))) {
      throw InvariantError(name() + ": scalars arrived out of filter order");
    }
    collecting_.row = in->row;
    collecting_.col = in->col;
    collecting_.values[std::size_t(count_)] = in->values.at(0);
    if (++count_ == filters_) complete_ = true;
  }
  if (complete_ && !out_) {
    out_ = std::move(collecting_);
    collecting_ = Token{};
    collecting_.values.assign(std::size_t(filters_), 0);
    count_ = 0;
    complete_ = false;
  }
}

// --- PoolBuffer --------------------------------------------------------------------

PoolBuffer::PoolBuffer(std::string name, Dims in, const PoolSpec& spec)
    : Stage(std::move(name)), in_(in), out_dims_(output_dims(in, spec)), spec_(spec) {}

bool PoolBuffer::can_accept() const {
  return received_ < in_.positions() && std::int64_t(fifo_.size()) <= out_dims_.width;
}

Token PoolBuffer::take() {
  Token t = std::move(fifo_.front());
  fifo_.pop_front();
  return t;
}

void PoolBuffer::tick(std::int64_t, Token* in) {
  if (!in) return;
  const int r = int(received_ / in_.width);
  const int c = int(received_ % in_.width);
  if (in->row != r || in->col != c || int(in->values.size()) != in_.depth) {
    throw InvariantError(name() + ": out-of-order or malformed stream element");
  }
  const int win = spec_.window;
  const int s = spec_.stride;
  const int d = in_.depth;
  const int or_lo = std::max(0, ceil_div(r - win + 1, s));
  const int or_hi = std::min(out_dims_.height - 1, r / s);
  const int oc_lo = std::max(0, ceil_div(c - win + 1, s));
  const int oc_hi = std::min(out_dims_.width - 1, c / s);
  for (int orow = or_lo; orow <= or_hi; ++orow) {
    if (open_.empty() || open_.back().row < orow) {
      open_.push_back({orow, std::vector<std::int32_t>(std::size_t(out_dims_.width) * d, 0),
                       std::vector<char>(std::size_t(out_dims_.width), 0)});
    }
    auto it = std::find_if(open_.begin(), open_.end(), [&](const OpenRow& o) { return o.row == orow; });
    for (int oc = oc_lo; oc <= oc_hi; ++oc) {
      auto* slot = it->values.data() + std::size_t(oc) * d;
      if (!it->opened[std::size_t(oc)]) {
        std::copy(in->values.begin(), in->values.end(), slot);
        it->opened[std::size_t(oc)] = 1;
      } else {
        for (int ch = 0; ch < d; ++ch) slot[ch] = std::max(slot[ch], in->values[std::size_t(ch)]);
      }
    }
  }
  ++received_;
  if (c != in_.width - 1) return;
  while (!open_.empty() && open_.front().row * s + win - 1 <= r) {
    auto& row = open_.front();
    for (int oc = 0; oc < out_dims_.width; ++oc) {
      auto b = row.values.begin() + std::ptrdiff_t(oc) * d;
      fifo_.push_back(Token{row.row, oc, 0, std::vector<std::int32_t>(b, b + d)});
    }
    ++rows_released_;
    open_.pop_front();
  }
}

// --- Sink -------------------------------------------------------------------------

Sink::Sink(std::string name, Dims dims) : Stage(std::move(name)), dims_(dims), tensor_(dims) {}

Token Sink::take() { throw InvariantError(name() + ": sink has no output"); }

void Sink::tick(std::int64_t cycle, Token* in) {
  if (!in) return;
  const int r = int(received_ / dims_.width);
  const int c = int(received_ % dims_.width);
  if (in->row != r || in->col != c || int(in->values.size()) != dims_.depth) {
    throw InvariantError(name() + ": out-of-order or malformed output element");
  }
  for (int ch = 0; ch < dims_.depth; ++ch) tensor_.at(r, c, ch).raw = in->values[std::size_t(ch)];
  ++received_;
  last_cycle_ = cycle;
}

// --- simulation ----------------------------------------------------------------------

std::string format_trace(const TraceEvent& e) {
  static constexpr const char* kinds[] = {"accept", "emit", "stall"};
  std::string s = std::to_string(e.cycle);
  s += ' ';
  s += e.stage;
  s += ' ';
  s += kinds[int(e.kind)];
  s += ' ' + std::to_string(e.row) + ' ' + std::to_string(e.col) + ' ' + std::to_string(e.aux);
  return s;
}

SimResult simulate_group(const NetworkSpec& net, LayerRange group, const Tensor3D& input,
                         const std::vector<FilterBank>& weights, const FusionPlan& plan,
                         const SimOptions& opts, std::int64_t cycle_offset) {
  const auto dims = chain_dims(net);
  const auto ords = conv_ordinals(net);
  if (group.last >= net.layers.size() || group.first > group.last) {
    throw ValidationError("group range outside network");
  }
  if (input.dims() != dims[group.first]) {
    throw ValidationError("group input dims do not match layer " + std::to_string(group.first));
  }

  std::vector<std::unique_ptr<Stage>> stages;
  std::vector<int> emits_layer;  // per stage: layer whose output it carries, or -1
  std::vector<ConvEngine*> engines;
  std::int64_t bound = 100'000;

  stages.push_back(std::make_unique<Source>("src" + std::to_string(group.first), input));
  emits_layer.push_back(-1);
  for (std::size_t i = group.first; i <= group.last; ++i) {
    const std::string tag = "L" + std::to_string(i);
    const Dims in = dims[i];
    bound += 4 * in.positions();
    if (const auto* c = std::get_if<ConvSpec>(&net.layers[i])) {
      const auto ord = std::size_t(ords[i]);
      if (ord >= weights.size()) throw ValidationError("missing weights for conv layer " + std::to_string(i));
      const int dpar = plan.depth_parallel.at(ord);
      stages.push_back(std::make_unique<LineBuffer>(tag + ".lb", in, c->kernel, c->stride, c->pad));
      emits_layer.push_back(-1);
      auto eng = std::make_unique<ConvEngine>(tag + ".conv", *c, in.depth, dpar, weights[ord], net.format);
      engines.push_back(eng.get());
      bound += 4 * dims[i + 1].positions() * eng->issues_per_window() + 4 * eng->latency();
      stages.push_back(std::move(eng));
      emits_layer.push_back(-1);
      stages.push_back(std::make_unique<Assembler>(tag + ".asm", c->filters));
      emits_layer.push_back(int(i));
    } else {
      stages.push_back(std::make_unique<PoolBuffer>(tag + ".pool", in, std::get<PoolSpec>(net.layers[i])));
      emits_layer.push_back(int(i));
    }
  }
  auto sink_owner = std::make_unique<Sink>("sink" + std::to_string(group.last), dims[group.last + 1]);
  Sink* sink = sink_owner.get();
  stages.push_back(std::move(sink_owner));
  emits_layer.push_back(-1);
  if (opts.max_cycles > 0) bound = opts.max_cycles;

  SimResult res;
  const std::size_t n = stages.size();
  res.stages.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.stages[i].name = stages[i]->name();
  std::vector<Tensor3D> captured;
  if (opts.capture_layers) {
    for (std::size_t i = group.first; i <= group.last; ++i) captured.emplace_back(dims[i + 1]);
  }
  res.layers.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) res.layers[i].layer = group.first + i;

  std::vector<char> fire(n, 0);
  std::vector<std::optional<Token>> moved(n);
  const TraceSink* trace = opts.trace;

  // Runs past sink completion so stages still emitting discarded tails (pool
  // rows/cols that fall outside every window) drain; timing stops at the sink.
  std::int64_t cycle = 0;
  for (;;) {
    ++cycle;
    if (cycle > bound) {
      throw InvariantError("simulation exceeded " + std::to_string(bound) + " cycles without completing");
    }
    const std::int64_t gcycle = cycle_offset + cycle;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const bool out = stages[i]->has_output();
      const bool ready = out && stages[i + 1]->can_accept();
      fire[i] = ready;
      if (out && !ready) {
        ++res.stages[i].stalls;
        ++res.stall_cycles;
        if (trace) (*trace)({gcycle, stages[i]->name(), TraceKind::stall, -1, -1, 0});
      }
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!fire[i]) continue;
      moved[i] = stages[i]->take();
      const Token& tok = *moved[i];
      ++res.stages[i].emitted;
      if (const int layer = emits_layer[i]; layer >= 0) {
        auto& lt = res.layers[std::size_t(layer) - group.first];
        if (lt.first_output == 0) lt.first_output = gcycle;
        lt.last_output = gcycle;
        if (opts.capture_layers) {
          auto& t = captured[std::size_t(layer) - group.first];
          for (std::size_t ch = 0; ch < tok.values.size(); ++ch) {
            t.at(tok.row, tok.col, int(ch)).raw = tok.values[ch];
          }
        }
      }
      if (trace) {
        (*trace)({gcycle, stages[i]->name(), TraceKind::emit, tok.row, tok.col, tok.aux});
        (*trace)({gcycle, stages[i + 1]->name(), TraceKind::accept, tok.row, tok.col, tok.aux});
      }
    }
    bool any_busy = false;
    auto tick_one = [&](std::size_t i) {
      Token* in = (i > 0 && fire[i - 1]) ? &*moved[i - 1] : nullptr;
      stages[i]->tick(cycle, in);
      any_busy = any_busy || stages[i]->busy();
    };
    if (opts.reverse_tick_order) {
      for (std::size_t i = n; i-- > 0;) tick_one(i);
    } else {
      for (std::size_t i = 0; i < n; ++i) tick_one(i);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (fire[i]) moved[i].reset();
    }
    bool progress = any_busy;
    for (std::size_t i = 0; !progress && i + 1 < n; ++i) {
      progress = stages[i]->has_output() && stages[i + 1]->can_accept();
    }
    if (!progress) {
      if (sink->complete()) break;
      throw InvariantError("pipeline deadlock at cycle " + std::to_string(gcycle));
    }
  }

  res.total_cycles = sink->last_cycle();
  res.group_cycles = {res.total_cycles};
  for (auto* e : engines) res.saturations += e->saturations();
  res.output = sink->release();
  if (opts.capture_layers) res.layer_outputs = std::move(captured);
  return res;
}

SimResult simulate_plan(const NetworkSpec& net, const Tensor3D& input, const std::vector<FilterBank>& weights,
                        const FusionPlan& plan, const SimOptions& opts) {
  validate_plan(plan, net);
  if (weights.size() != conv_count(net)) {
    throw ValidationError("expected " + std::to_string(conv_count(net)) + " filter banks, got " +
                          std::to_string(weights.size()));
  }
  SimResult total;
  Tensor3D cur = input;
  for (const auto& g : plan.groups) {
    SimResult r = simulate_group(net, g, cur, weights, plan, opts, total.total_cycles);
    total.total_cycles += r.total_cycles;
    total.group_cycles.push_back(r.total_cycles);
    total.saturations += r.saturations;
    total.stall_cycles += r.stall_cycles;
    for (auto& l : r.layers) total.layers.push_back(l);
    for (auto& s : r.stages) total.stages.push_back(std::move(s));
    for (auto& t : r.layer_outputs) total.layer_outputs.push_back(std::move(t));
    cur = std::move(r.output);
  }
  total.output = std::move(cur);
  return total;
}

}  // namespace decoil::dataflow
