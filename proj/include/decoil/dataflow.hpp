#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/tensor.hpp"

// Cycle-driven model of the fused line-buffer pipeline.
//
// One global clock. Every cycle the simulator first samples, for each link,
// producer.has_output() and consumer.can_accept() from start-of-cycle state;
// links where both hold fire, their tokens are taken, and only then does every
// stage tick with its incoming token (if any). No stage reads another stage's
// state during tick, so evaluation order cannot change the outcome.
namespace decoil::dataflow {

// Unit of transfer between stages. Depending on the link it is a
// depth-concatenated stream element (values = d channels), a w x w x d window
// (values in (row, col, depth-innermost) order) or a single conv scalar
// (aux = filter index).
struct Token {
  int row = 0;
  int col = 0;
  int aux = 0;
  std::vector<std::int32_t> values;
};

class Stage {
 public:
  explicit Stage(std::string name) : name_(std::move(name)) {}
  virtual ~Stage() = default;
  Stage(const Stage&) = delete;
  Stage& operator=(const Stage&) = delete;

  const std::string& name() const { return name_; }

  virtual bool can_accept() const = 0;
  virtual bool has_output() const = 0;
  virtual Token take() = 0;
  // `in` is non-null only when the upstream link fired this cycle.
  virtual void tick(std::int64_t cycle, Token* in) = 0;
  // True while the stage will change state on its own (no handshake needed).
  virtual bool busy() const { return false; }

 private:
  std::string name_;
};

// Drives one stage for one cycle in isolation: returns the token that was on
// its output at the start of the cycle (if any) and offers `in`.
std::optional<Token> step(Stage& s, std::int64_t cycle, std::optional<Token> in);

// --- stages --------------------------------------------------------------

class Source final : public Stage {
 public:
  Source(std::string name, const Tensor3D& t);
  bool can_accept() const override { return false; }
  bool has_output() const override { return next_ < total_; }
  Token take() override;
  void tick(std::int64_t, Token*) override {}

 private:
  const Tensor3D& t_;
  std::int64_t next_ = 0;
  std::int64_t total_ = 0;
};

// Emits h*w depth-concatenated elements in raster order.
std::vector<Token> stream_input(const Tensor3D& t);
Tensor3D collect_stream(std::span<const Token> stream, Dims dims);

// Window generator over w stored rows of (W + 2p) element slots. Padding is
// synthesized when a window is assembled, never stored. A slot can only be
// overwritten once no pending window needs its element.
class LineBuffer final : public Stage {
 public:
  LineBuffer(std::string name, Dims in, int kernel, int stride, int pad);
  bool can_accept() const override;
  bool has_output() const override { return out_.has_value(); }
  Token take() override;
  void tick(std::int64_t cycle, Token* in) override;

  std::int64_t capacity() const { return capacity_; }
  std::int64_t received() const { return received_; }
  int windows_emitted() const { return emitted_; }

 private:
  std::int64_t oldest_needed() const;
  std::int64_t latest_needed() const;
  Token assemble() const;

  Dims in_;
  Dims out_dims_;
  int kernel_, stride_, pad_;
  std::int64_t capacity_;
  std::vector<std::int32_t> store_;
  std::int64_t received_ = 0;
  int next_row_ = 0, next_col_ = 0;
  bool done_ = false;
  int emitted_ = 0;
  std::optional<Token> out_;
};

// Splits a w x w x d window into d planar w x w windows and back.
std::vector<std::vector<std::int32_t>> split_window(std::span<const std::int32_t> window, int kernel,
                                                    int depth);
std::vector<std::int32_t> concat_planes(const std::vector<std::vector<std::int32_t>>& planes);

// Holds one window for filters * serial_groups issue cycles, one
// (filter, depth group) issue per cycle, result available `latency` cycles
// after issue. Depth groups are issued outermost; partial sums of earlier
// groups are kept in a per-filter accumulator row.
class ConvEngine final : public Stage {
 public:
  ConvEngine(std::string name, const ConvSpec& spec, int in_depth, int dpar, const FilterBank& filters,
             FixedPointFormat fmt);
  bool can_accept() const override;
  bool has_output() const override { return out_.has_value(); }
  Token take() override;
  void tick(std::int64_t cycle, Token* in) override;
  bool busy() const override { return cur_.has_value() || !inflight_.empty(); }

  int latency() const { return latency_; }
  int issues_per_window() const { return filters_ * groups_; }
  std::int64_t saturations() const { return saturations_; }
  std::int64_t issued() const { return issued_; }

 private:
  struct Pending {
    std::int64_t ready;
    bool emit;
    Token token;
  };
  bool has_space() const;
  std::int32_t compute(int group, int filter);

  ConvSpec spec_;
  int depth_, dpar_, groups_, filters_, taps_;
  int latency_;
  std::size_t capacity_;
  const FilterBank& bank_;
  int frac_;
  std::optional<Token> cur_;
  int cursor_ = 0;
  std::vector<std::int32_t> acc_;
  std::vector<std::int32_t> scratch_;
  std::vector<std::int32_t> plane_sums_;
  std::deque<Pending> inflight_;
  std::optional<Token> out_;
  std::int64_t saturations_ = 0;
  std::int64_t issued_ = 0;
};

// Gathers the k scalars of one output position into one depth-k element.
class Assembler final : public Stage {
 public:
  Assembler(std::string name, int filters);
  bool can_accept() const override { return !complete_; }
  bool has_output() const override { return out_.has_value(); }
  Token take() override;
  void tick(std::int64_t cycle, Token* in) override;

 private:
  int filters_;
  Token collecting_;
  int count_ = 0;
  bool complete_ = false;
  std::optional<Token> out_;
};

// Pool line buffer: one row of W_out running maxima per open output row. The
// first element landing in a slot opens it, later ones replace it with
// max(old, new). A pooled row is released once its last input row completes.
class PoolBuffer final : public Stage {
 public:
  PoolBuffer(std::string name, Dims in, const PoolSpec& spec);
  bool can_accept() const override;
  bool has_output() const override { return !fifo_.empty(); }
  Token take() override;
  void tick(std::int64_t cycle, Token* in) override;

  int rows_released() const { return rows_released_; }

 private:
  struct OpenRow {
    int row;
    std::vector<std::int32_t> values;
    std::vector<char> opened;
  };
  Dims in_, out_dims_;
  PoolSpec spec_;
  std::int64_t received_ = 0;
  std::deque<OpenRow> open_;
  std::deque<Token> fifo_;
  int rows_released_ = 0;
};

class Sink final : public Stage {
 public:
  Sink(std::string name, Dims dims);
  bool can_accept() const override { return true; }
  bool has_output() const override { return false; }
  Token take() override;
  void tick(std::int64_t cycle, Token* in) override;

  bool complete() const { return received_ == dims_.positions(); }
  std::int64_t last_cycle() const { return last_cycle_; }
  Tensor3D release() { return std::move(tensor_); }

 private:
  Dims dims_;
  Tensor3D tensor_;
  std::int64_t received_ = 0;
  std::int64_t last_cycle_ = 0;
};

// --- simulation ---------------------------------------------------------------

enum class TraceKind { accept, emit, stall };

struct TraceEvent {
  std::int64_t cycle;
  std::string_view stage;
  TraceKind kind;
  int row, col, aux;
};

using TraceSink = std::function<void(const TraceEvent&)>;

// "<cycle> <stage> <accept|emit|stall> <row> <col> <aux>"
std::string format_trace(const TraceEvent& e);

struct SimOptions {
  bool capture_layers = false;
  const TraceSink* trace = nullptr;
  // Ticks stages last-to-first. Results must not change; exposed for tests.
  bool reverse_tick_order = false;
  // 0 selects a bound derived from the workload.
  std::int64_t max_cycles = 0;
};

struct LayerTiming {
  std::size_t layer = 0;
  std::int64_t first_output = 0;  // global cycle stamps, 1-based
  std::int64_t last_output = 0;
  friend bool operator==(const LayerTiming&, const LayerTiming&) = default;
};

struct StageStats {
  std::string name;
  std::int64_t emitted = 0;
  std::int64_t stalls = 0;
};

struct SimResult {
  Tensor3D output;
  std::vector<Tensor3D> layer_outputs;  // filled when capture_layers
  std::vector<std::int64_t> group_cycles;
  std::int64_t total_cycles = 0;
  std::vector<LayerTiming> layers;
  std::vector<StageStats> stages;
  std::int64_t saturations = 0;
  std::int64_t stall_cycles = 0;
};

// Runs one fused group starting at global cycle `cycle_offset` + 1.
SimResult simulate_group(const NetworkSpec& net, LayerRange group, const Tensor3D& input,
                         const std::vector<FilterBank>& weights, const FusionPlan& plan,
                         const SimOptions& opts = {}, std::int64_t cycle_offset = 0);

// Groups run back to back; each boundary round-trips the full tensor off-chip.
SimResult simulate_plan(const NetworkSpec& net, const Tensor3D& input,
                        const std::vector<FilterBank>& weights, const FusionPlan& plan,
                        const SimOptions& opts = {});

}  // namespace decoil::dataflow
