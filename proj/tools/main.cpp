#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cpsched/cli.hpp"

namespace {

struct Overrides {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<double> alphas;
    std::vector<std::string> methods;
    std::vector<double> lambda_c;
    std::size_t day = 0;
};

using Command = std::function<void(const cpsched::bench::RunConfig&, std::ostream&)>;

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace cpsched;
    CLI::App app{"Conformal robust scheduling of a renewable-powered data center"};
    app.require_subcommand(1);

    Overrides ov;
    std::string stage;
    Command command;

    const auto add = [&](const std::string& name, const std::string& help, Command fn,
                         bool with_day = false) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", ov.config, "JSON run configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", ov.seed, "Master seed for synthesis, split and training");
        sub->add_option("--out", ov.out, "Run directory holding all artifacts");
        sub->add_option("--alpha", ov.alphas, "Miscoverage levels, comma separated")->delimiter(',');
        sub->add_option("--method", ov.methods,
                        "Methods, comma separated: AMV_CQR, IMV_CQR, AMV_Point, IMV_Point, RO_A")
            ->delimiter(',');
        sub->add_option("--lambda-c", ov.lambda_c, "T-EAC prices in $/kWh, comma separated")
            ->delimiter(',');
        if (with_day)
            sub->add_option("--day", ov.day, "Position of the scheduled day within the test split");
        sub->callback([&, name, fn] {
            stage = name;
            command = fn;
        });
    };
    add("synth", "Generate synthetic PV, market and workload data", cli::cmd_synth);
    add("train", "Train the lower, upper and point quantile models", cli::cmd_train);
    add("calibrate", "Calibrate every configured method and alpha", cli::cmd_calibrate);
    add("schedule", "Solve the robust schedule for one test day (first method/alpha/lambda_c)",
        cli::cmd_schedule, true);
    add("benchmark", "Evaluate methods x alphas x lambda_c over the test days", cli::cmd_benchmark);
    add("evaluate", "Report interval coverage and width on the test days", cli::cmd_evaluate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        bench::RunConfig cfg = cli::load_config(ov.config);
        for (auto* sub : app.get_subcommands()) {
            if (sub->count("--seed")) cfg.seed = cfg.synth.seed = ov.seed;
            if (sub->count("--out")) cfg.out = ov.out;
            if (sub->count("--alpha")) cfg.alphas = ov.alphas;
            if (sub->count("--lambda-c")) cfg.lambda_c = ov.lambda_c;
            if (sub->count("--method")) {
                cfg.methods.clear();
                for (const auto& m : ov.methods) cfg.methods.push_back(conformal::method_from_string(m));
            }
            if (sub->get_name() == "schedule" && sub->count("--day")) cfg.schedule_day = ov.day;
        }
        command(cfg, std::cout);
    } catch (const cli::StageError& e) {
        std::cerr << "error: " << stage << ": missing-stage " << e.stage() << ": " << one_line(e.what())
                  << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << stage << ": usage: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << stage << ": " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
