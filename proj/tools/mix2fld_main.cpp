// Command-line front end for the Mix2FLD simulator.
//
//   mix2fld run --config <path> [--seed N] [--out DIR]
//   mix2fld run --preset <name> [--seed N] [--out DIR]
//   mix2fld privacy --config <path> | --preset <name> [--seed N] [--out DIR]
//   mix2fld presets list
//   mix2fld presets show <name>
//   mix2fld presets write <dir>
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mix2fld/mix2fld.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void print_usage() {
    std::cout << "usage:\n"
              << "  mix2fld run --config <path> [--seed N] [--out DIR]\n"
              << "  mix2fld run --preset <name> [--seed N] [--out DIR]\n"
              << "  mix2fld privacy --config <path> | --preset <name> [--seed N] [--out DIR]\n"
              << "  mix2fld presets list\n"
              << "  mix2fld presets show <name>\n"
              << "  mix2fld presets write <dir>\n";
}

CliOptions parse_options(const std::vector<std::string>& args) {
    CliOptions o;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        auto need_value = [&](const char* flag) -> const std::string& {
            if (i + 1 >= args.size())
                throw mix2fld::ConfigError(std::string(flag) + " expects a value");
            return args[++i];
        };
        if (a == "--config") o.config_path = need_value("--config");
        else if (a == "--preset") o.preset = need_value("--preset");
        else if (a == "--seed") o.seed = std::stoull(need_value("--seed"));
        else if (a == "--out") o.out_dir = need_value("--out");
        else throw mix2fld::ConfigError("unknown option '" + a + "'");
    }
    if (o.config_path.empty() && o.preset.empty())
        throw mix2fld::ConfigError("either --config or --preset is required");
    if (!o.config_path.empty() && !o.preset.empty())
        throw mix2fld::ConfigError("--config and --preset are mutually exclusive");
    return o;
}

mix2fld::ExperimentConfig load_config(const CliOptions& o) {
    mix2fld::ExperimentConfig c = o.preset.empty()
                                      ? mix2fld::parse_config(o.config_path)
                                      : mix2fld::parse_config_text(mix2fld::presets::text(o.preset),
                                                                   "preset:" + o.preset);
    if (o.seed) c.seed = *o.seed;
    if (o.out_dir) c.out_dir = *o.out_dir;
    return c;
}

int cmd_run(const CliOptions& o) {
    mix2fld::ExperimentConfig base = load_config(o);

    std::vector<std::size_t> sweep = base.sweep_devices;
    if (sweep.empty()) sweep.push_back(base.devices);
    const bool sweeping = !base.sweep_devices.empty();

    for (std::size_t n_devices : sweep) {
        mix2fld::ExperimentConfig c = base;
        c.devices = n_devices;
        c.sweep_devices.clear();
        std::string dir = c.out_dir;
        if (sweeping) dir += "/d" + std::to_string(n_devices);
        mix2fld::ExperimentReport report = mix2fld::run_experiment(c);
        mix2fld::emit_csv(report, dir);

        const mix2fld::RoundLog& last = report.rounds.back();
        double ref_acc = last.accuracy.empty()
                             ? 0.0
                             : last.accuracy[std::size_t(report.ref_device) % last.accuracy.size()];
        std::printf("%s: %zu rounds, %s, ref device %d accuracy %.4f, %.3f s simulated -> %s\n",
                    mix2fld::to_string(c.scheme), report.rounds.size(),
                    last.converged ? "converged" : "round cap reached", report.ref_device, ref_acc,
                    last.cum_time_s, dir.c_str());
    }
    return 0;
}

int cmd_privacy(const CliOptions& o) {
    mix2fld::ExperimentConfig c = load_config(o);
    if (c.privacy_mode == mix2fld::PrivacyMode::None)
        throw mix2fld::ConfigError("privacy requires privacy_mode = mixup|mix2up|both");
    if (c.privacy_lambdas.empty())
        throw mix2fld::ConfigError("privacy requires a privacy_lambdas grid");

    mix2fld::Dataset raw;
    std::string name;
    if (c.dataset == mix2fld::DatasetKind::Idx) {
        raw = mix2fld::load_idx(c.train_images, c.train_labels);
        name = std::filesystem::path(c.train_images).filename().string();
    } else {
        mix2fld::RngStream rng = mix2fld::RngStream::derive(c.seed, "data/synth");
        raw = mix2fld::synth_gaussian(c.synth_classes, c.synth_dim,
                                      c.synth_train_per_class + c.synth_test_per_class,
                                      c.synth_spread, rng);
        name = "synthetic";
    }

    mix2fld::ExperimentReport report;
    report.config = c;
    report.resolved = mix2fld::resolved_text(c);
    report.privacy =
        mix2fld::privacy_sweep(raw, c.privacy_lambdas, c.privacy_n_s, c.privacy_mode, c.seed, name);
    mix2fld::emit_csv(report, c.out_dir);

    std::printf("%-12s %-8s %-8s %s\n", "dataset", "lambda", "scheme", "privacy");
    for (const auto& row : report.privacy)
        std::printf("%-12s %-8.3f %-8s %.3f\n", row.dataset.c_str(), row.lambda,
                    row.scheme.c_str(), row.privacy);
    return 0;
}

int cmd_presets(const std::vector<std::string>& args) {
    if (args.empty() || args[0] == "list") {
        for (const std::string& name : mix2fld::presets::names()) std::cout << name << "\n";
        return 0;
    }
    if (args[0] == "show") {
        if (args.size() < 2) throw mix2fld::ConfigError("presets show expects a name");
        std::cout << mix2fld::presets::text(args[1]);
        return 0;
    }
    if (args[0] == "write") {
        if (args.size() < 2) throw mix2fld::ConfigError("presets write expects a directory");
        std::filesystem::create_directories(args[1]);
        for (const std::string& name : mix2fld::presets::names()) {
            std::ofstream f(std::filesystem::path(args[1]) / (name + ".cfg"), std::ios::binary);
            f << mix2fld::presets::text(name);
            std::cout << args[1] << "/" << name << ".cfg\n";
        }
        return 0;
    }
    throw mix2fld::ConfigError("unknown presets action '" + args[0] + "'");
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        print_usage();
        return args.empty() ? 1 : 0;
    }
    const std::string cmd = args[0];
    args.erase(args.begin());
    try {
        if (cmd == "run") return cmd_run(parse_options(args));
        if (cmd == "privacy") return cmd_privacy(parse_options(args));
        if (cmd == "presets") return cmd_presets(args);
        print_usage();
        throw mix2fld::ConfigError("unknown command '" + cmd + "'");
    } catch (const mix2fld::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
