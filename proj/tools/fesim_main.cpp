#include "fesim/cli.hpp"
#include "fesim/report.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    namespace cli = fesim::cli;

    CLI::App app{"fesim: switched-capacitor stimulator simulator"};
    app.require_subcommand(1);

    cli::CommonOptions opt;
    std::string config, out, preset, param, range;
    long long seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file");
        sub->add_option("--preset", preset, "flyback preset (paper_120, table1_135)");
        sub->add_option("--seed", seed, "reserved; ignored");
        sub->add_flag("--ascii", opt.ascii, "plain ASCII output");
    };

    auto* validate = app.add_subcommand("validate", "check a protocol against the device ratings");
    add_common(validate);
    auto* simulate = app.add_subcommand("simulate", "run a pulse train and write the waveform CSV");
    add_common(simulate);
    simulate->add_option("--out", out, "waveform CSV path");
    auto* sweep = app.add_subcommand("sweep", "run one simulation per parameter value");
    add_common(sweep);
    sweep->add_option("--out", out, "summary CSV path (default stdout)");
    sweep->add_option("--param", param, "voltage_code, frequency, load_r or target_current (mA)")->required();
    sweep->add_option("--range", range, "start:stop:step or a,b,c");
    auto* check = app.add_subcommand("spec-check", "run the built-in rating checks");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::input_error;
    }

    if (!config.empty()) opt.config_path = config;
    if (!out.empty()) opt.out_path = out;
    if (!preset.empty()) opt.preset = preset;
    opt.ascii = opt.ascii || fesim::plain_ascii_requested();

    if (validate->parsed()) return cli::cmd_validate(opt, std::cout, std::cerr);
    if (simulate->parsed()) return cli::cmd_simulate(opt, std::cout, std::cerr);
    if (sweep->parsed()) return cli::cmd_sweep(opt, param, range, std::cout, std::cerr);
    return cli::cmd_spec_check(opt, std::cout, std::cerr);
}
