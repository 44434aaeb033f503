#include <iostream>

#include "CLI11.hpp"
#include "decoil/commands.hpp"
#include "decoil/error.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kInternal = 3 };

void add_common(CLI::App* sub, decoil::cli::Options& o, bool data) {
  sub->add_option("--network", o.network, "network document")->required();
  sub->add_option("--plan", o.plan, "fusion plan, e.g. 0-2|3-6");
  sub->add_option("--dpar", o.dpar, "depth parallelism per conv layer, comma separated");
  sub->add_option("--bytes-per-value", o.bytes_per_value, "off-chip bytes per value (1, 2, 4)");
  sub->add_option("--freq-mhz", o.freq_mhz, "clock frequency for ms figures");
  sub->add_flag("--reread-weights-per-depth-group", o.reread_weights,
                "charge weight traffic once per serial depth group");
  sub->add_option("--out", o.out_dir, "output directory");
  sub->add_flag("--timing", o.timing, "include wall-clock seconds in the report");
  if (data) {
    sub->add_option("--input", o.input, "input tensor file");
    sub->add_option("--weights", o.weights, "weights file");
    sub->add_option("--seed", o.seed, "seed for data not given as files");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoil: fused line-buffer CNN accelerator model"};
  app.require_subcommand(1);

  decoil::cli::Options o;
  decoil::cli::GenOptions g;
  std::string dims_text;

  auto* golden = app.add_subcommand("golden", "layer-by-layer reference; writes every layer output");
  add_common(golden, o, true);
  auto* simulate = app.add_subcommand("simulate", "cycle-driven dataflow simulation");
  add_common(simulate, o, true);
  simulate->add_option("--trace", o.trace, "write a per-cycle event trace");
  auto* analyze = app.add_subcommand("analyze", "closed-form cost report");
  add_common(analyze, o, false);
  auto* dse = app.add_subcommand("dse", "enumerate fusion partitions");
  add_common(dse, o, false);
  dse->add_option("--dsp-max", o.dsp_max, "multiplier budget");
  auto* gen = app.add_subcommand("gen", "seeded input/weight files");
  gen->add_option("--network", g.network, "network document");
  gen->add_option("--dims", dims_text, "h,w,d when no network is given");
  gen->add_option("--seed", g.seed, "generator seed")->required();
  gen->add_option("--out", g.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*golden) {
      std::cout << decoil::serialize_report(decoil::cli::cmd_golden(o));
    } else if (*simulate) {
      std::cout << decoil::serialize_report(decoil::cli::cmd_simulate(o));
    } else if (*analyze) {
      std::cout << decoil::serialize_report(decoil::cli::cmd_analyze(o));
    } else if (*dse) {
      std::cout << decoil::cli::cmd_dse(o).pareto_json;
    } else if (*gen) {
      if (!dims_text.empty()) g.dims = decoil::cli::parse_dims(dims_text);
      decoil::cli::cmd_gen(g);
    }
  } catch (const decoil::ParseError& e) {
    std::cerr << "error: " << e.what();
    if (e.position()) std::cerr << " (at byte " << *e.position() << ")";
    std::cerr << "\n";
    return kUsage;
  } catch (const decoil::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const decoil::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
