// gipcnn: convert CNN models to FHE-friendly form, plan and run them on
// the slot simulator, and verify packed execution against the plaintext
// reference.
//
// exit codes: 0 ok, 1 verification failure, 2 usage/schema error,
//             3 geometry error, 4 level error, 70 internal error

#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "gipcnn/executor.hpp"
#include "gipcnn/graph.hpp"
#include "gipcnn/model_io.hpp"
#include "gipcnn/oracle.hpp"
#include "gipcnn/planner.hpp"
#include "gipcnn/tensor_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitSchema = 2;
constexpr int kExitGeometry = 3;
constexpr int kExitLevel = 4;
constexpr int kExitInternal = 70;

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

struct ContextFlags {
  std::uint64_t slots = std::uint64_t{1} << 15;
  int max_level = 20;
  int refresh = -1;  // default: max_level
  int base_size = 0; // default: derived from the model input

  void attach(CLI::App* cmd) {
    cmd->add_option("--slots", slots, "ciphertext slot count (power of two)")
        ->capture_default_str();
    cmd->add_option("--max-level", max_level, "multiplicative level budget")
        ->capture_default_str();
    cmd->add_option("--refresh", refresh,
                    "bootstrap refresh level (default: max level)");
    cmd->add_option("--base-size", base_size,
                    "base packing grid side (default: largest power of two "
                    "fitting the slots, capped at the input size)");
  }

  int resolve_base(int input_h) const {
    if (base_size > 0) return base_size;
    int b = 1;
    while (b < input_h) {
      const std::uint64_t next = static_cast<std::uint64_t>(b) * 2;
      if (next * next > slots) break;
      b *= 2;
    }
    return b;
  }

  void check() const {
    if (!is_pow2(slots)) {
      throw CLI::ValidationError("--slots must be a power of two");
    }
    if (base_size > 0 && !is_pow2(static_cast<std::uint64_t>(base_size))) {
      throw CLI::ValidationError("--base-size must be a power of two");
    }
  }
};

gipcnn::PlainTensor random_input(std::mt19937_64& rng,
                                 const gipcnn::TensorShape& shape) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  gipcnn::PlainTensor t(shape.channels, shape.height, shape.width);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

int cmd_convert(const std::string& in, const std::string& out,
                const std::string& preset, int resize) {
  gipcnn::ModelGraph m = gipcnn::load_model(in);
  for (const gipcnn::GraphNode& n : m.nodes) {
    if (n.kind == gipcnn::NodeKind::activation &&
        (n.act != gipcnn::ActKind::polyact_rn || n.preset != preset)) {
      std::cout << n.id << ": " << gipcnn::act_kind_name(n.act)
                << " -> polyact_rn(" << preset << ")\n";
    } else if (n.kind == gipcnn::NodeKind::maxpool) {
      std::cout << n.id << ": maxpool -> avgpool (window " << n.window
                << ", stride " << n.stride << ")\n";
    }
  }
  const gipcnn::ConversionSummary s = gipcnn::convert_model(m, preset);
  if (resize > 0) m.resize_input_to = resize;
  gipcnn::save_model(out, m);
  std::cout << "replaced " << s.activations_replaced << " activation(s), "
            << s.maxpools_replaced << " maxpool(s); wrote " << out << "\n";
  return kExitOk;
}

int cmd_plan(const std::string& model_path, const ContextFlags& flags) {
  const gipcnn::ModelGraph m = gipcnn::load_model(model_path);
  gipcnn::HEContext ctx(flags.slots, flags.max_level, flags.refresh);
  const int base = flags.resolve_base(m.input.height);
  const gipcnn::Plan p = gipcnn::plan(m, ctx, base);
  std::cout << gipcnn::render_plan(p);
  return kExitOk;
}

int cmd_run(const std::string& model_path, const std::string& input_path,
            const ContextFlags& flags, const std::string& output_path,
            const std::string& report_path) {
  const gipcnn::ModelGraph m = gipcnn::load_model(model_path);
  const gipcnn::PlainTensor input = gipcnn::read_plain_tensor(input_path);
  if (input.channels() != m.input.channels ||
      input.height() != m.input.height || input.width() != m.input.width) {
    throw gipcnn::GeometryError("input tensor shape does not match the model");
  }
  gipcnn::HEContext ctx(flags.slots, flags.max_level, flags.refresh);
  const int base = flags.resolve_base(m.input.height);

  const gipcnn::PackedTensor packed = gipcnn::pack(ctx, input, base);
  const gipcnn::ExecutionResult r = gipcnn::execute(ctx, m, packed);

  gipcnn::write_plain_tensor(output_path, gipcnn::unpack(r.output));
  const std::string report = gipcnn::render_report(r.report);
  std::cout << report;
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) {
      throw gipcnn::SchemaError("cannot write report file: " + report_path);
    }
    out << report;
  }
  std::cout << "wrote " << output_path << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& model_path, const ContextFlags& flags,
               int trials, std::uint64_t seed, double tolerance) {
  const gipcnn::ModelGraph m = gipcnn::load_model(model_path);
  if (trials == 0) {
    std::cout << "warning: 0 trials requested, nothing verified\n";
    return kExitOk;
  }
  gipcnn::HEContext ctx(flags.slots, flags.max_level, flags.refresh);
  const int base = flags.resolve_base(m.input.height);

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const gipcnn::PlainTensor x = random_input(rng, m.input);
    const gipcnn::ExecutionResult r =
        gipcnn::execute(ctx, m, gipcnn::pack(ctx, x, base));
    const gipcnn::PlainTensor ref = gipcnn::run_reference(m, x);
    worst = std::max(worst,
                     gipcnn::oracle::max_abs_diff(gipcnn::unpack(r.output), ref));
  }
  std::cout << "max abs error over " << trials << " trial(s): " << worst
            << " (tolerance " << tolerance << ")\n";
  if (worst > tolerance) {
    std::cout << "FAIL\n";
    return kExitVerify;
  }
  std::cout << "OK\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"encrypted-CNN packing simulator and cost profiler"};
  app.require_subcommand(1);

  // convert
  std::string conv_in, conv_out, preset = "relu";
  int resize = 0;
  CLI::App* convert =
      app.add_subcommand("convert", "rewrite a model into FHE-friendly form");
  convert->add_option("model_in", conv_in, "input model file")->required();
  convert->add_option("model_out", conv_out, "output model file")->required();
  convert->add_option("--preset", preset,
                      "polynomial coefficient preset (relu|silu)")
      ->check(CLI::IsMember({"relu", "silu"}))
      ->capture_default_str();
  convert->add_option("--resize", resize,
                      "record target input resolution metadata");

  // plan
  std::string plan_model;
  ContextFlags plan_flags;
  CLI::App* planc = app.add_subcommand("plan", "print the execution plan");
  planc->add_option("model", plan_model, "converted model file")->required();
  plan_flags.attach(planc);

  // run
  std::string run_model, run_input, run_output = "output.tensor";
  std::string run_report;
  ContextFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "execute a model on packed data");
  run->add_option("model", run_model, "converted model file")->required();
  run->add_option("input", run_input, "input tensor file")->required();
  run_flags.attach(run);
  run->add_option("--output", run_output, "output tensor path")
      ->capture_default_str();
  run->add_option("--report", run_report, "also write the cost report here");

  // verify
  std::string verify_model;
  ContextFlags verify_flags;
  int trials = 10;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  CLI::App* verify = app.add_subcommand(
      "verify", "differential-test packed execution against the reference");
  verify->add_option("model", verify_model, "converted model file")->required();
  verify_flags.attach(verify);
  verify->add_option("--trials", trials, "number of random inputs")
      ->capture_default_str();
  verify->add_option("--seed", seed, "random seed")->capture_default_str();
  verify->add_option("--tolerance", tolerance, "max abs error allowed")
      ->capture_default_str();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return kExitSchema;
    }

    if (*convert) return cmd_convert(conv_in, conv_out, preset, resize);
    if (*planc) {
      plan_flags.check();
      return cmd_plan(plan_model, plan_flags);
    }
    if (*run) {
      run_flags.check();
      return cmd_run(run_model, run_input, run_flags, run_output, run_report);
    }
    if (*verify) {
      verify_flags.check();
      return cmd_verify(verify_model, verify_flags, trials, seed, tolerance);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const gipcnn::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const gipcnn::LevelError& e) {
    std::cerr << "level error: " << e.what() << "\n";
    return kExitLevel;
  } catch (const gipcnn::GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitSchema;
}
