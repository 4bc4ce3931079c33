// qate: config-driven QATE sweeps, power-law fits and figure bundles.
//
// Exit codes: 0 success, 1 config error, 2 partial sweep failure, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qate/experiments.hpp"

namespace qe = qate::experiments;

namespace {

int cmd_validate(const std::string& config_path) {
    try {
        const auto cfg = qe::load_config(config_path);
        std::printf("ok: %s (%zu N x %zu T x %zu beta points, engine %s)\n", cfg.name.c_str(),
                    cfg.n_list.size(), cfg.t_list.size(), cfg.beta_list.size(),
                    qe::to_string(cfg.engine).c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }
}

int cmd_run(const std::string& config_path, int workers, std::string out_dir) {
    qe::ExperimentConfig cfg;
    try {
        cfg = qe::load_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }
    if (out_dir.empty()) out_dir = cfg.output_dir;
    std::vector<qe::ResultRecord> records;
    try {
        records = qe::run_sweep(cfg, workers);
    } catch (const qate::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }
    int failures = 0;
    for (const auto& r : records) {
        if (!r.error.empty()) {
            ++failures;
            std::fprintf(stderr, "point %s failed: %s\n", qe::point_tag(r).c_str(),
                         r.error.c_str());
        }
    }
    try {
        qe::emit_results(records, out_dir);
        // declared fits are evaluated as post-processing over the persisted
        // records and stored alongside them
        if (!cfg.fits.empty()) {
            nlohmann::json fits = nlohmann::json::array();
            const auto persisted =
                qe::load_records_json(std::filesystem::path(out_dir) / "results.json");
            for (const auto& f : cfg.fits) {
                try {
                    for (const auto& gf :
                         qe::fit_records(persisted, f.quantity, f.axis, f.lo, f.hi)) {
                        nlohmann::json j;
                        j["group"] = gf.group;
                        j["quantity"] = f.quantity;
                        j["axis"] = f.axis;
                        j["window"] = {f.lo, f.hi};
                        j["exponent"] = gf.fit.exponent;
                        j["prefactor"] = gf.fit.prefactor;
                        j["r2"] = gf.fit.r2;
                        j["points"] = gf.fit.points;
                        fits.push_back(std::move(j));
                    }
                } catch (const std::domain_error& e) {
                    nlohmann::json j;
                    j["quantity"] = f.quantity;
                    j["axis"] = f.axis;
                    j["error"] = e.what();
                    fits.push_back(std::move(j));
                }
            }
            std::ofstream fout(std::filesystem::path(out_dir) / "fits.json");
            fout << fits.dump(1) << '\n';
        }
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    std::printf("%zu points -> %s (%d failed)\n", records.size(), out_dir.c_str(), failures);
    return failures == 0 ? 0 : 2;
}

int cmd_fit(const std::string& csv_path, const std::string& quantity, const std::string& axis,
            const std::string& window) {
    double lo = 0.0, hi = 0.0;
    if (std::sscanf(window.c_str(), "%lf:%lf", &lo, &hi) != 2 || !(hi > lo)) {
        std::fprintf(stderr, "config error: --window must be LO:HI with LO < HI\n");
        return 1;
    }
    std::vector<qe::ResultRecord> records;
    try {
        records = qe::load_records_csv(csv_path);
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }
    try {
        for (const auto& gf : qe::fit_records(records, quantity, axis, lo, hi))
            std::printf("%s: exponent=%+.4f prefactor=%.6g r2=%.6f (%d points)\n",
                        gf.group.c_str(), gf.fit.exponent, gf.fit.prefactor, gf.fit.r2,
                        gf.fit.points);
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "fit error: %s\n", e.what());
        return 1;
    }
    return 0;
}

int cmd_figure(const std::string& results_dir, const std::string& figure_id) {
    try {
        const auto records =
            qe::load_records_json(std::filesystem::path(results_dir) / "results.json");
        qe::emit_figure_data(records, figure_id, std::filesystem::path(results_dir) / "figures");
        std::printf("wrote %s/figures/%s\n", results_dir.c_str(), figure_id.c_str());
        return 0;
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"QATE simulation lab"};
    app.require_subcommand(1);

    std::string config_path, out_dir, csv_path, results_dir;
    std::string quantity = "cod", axis = "T", window, figure_id;
    int workers = 1;

    auto* run = app.add_subcommand("run", "run a sweep from a config file");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("--workers", workers, "worker threads over sweep points");
    run->add_option("--out", out_dir, "output directory (overrides config)");

    auto* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* fit = app.add_subcommand("fit", "power-law fit over persisted results");
    fit->add_option("results", csv_path, "results.csv from a run")->required();
    fit->add_option("--quantity", quantity, "column to fit (e.g. cod)")->required();
    fit->add_option("--axis", axis, "T, N or S_over_N")->required();
    fit->add_option("--window", window, "fit window LO:HI on the axis")->required();

    auto* figure = app.add_subcommand("figure", "emit plot-data bundle for a figure id");
    figure->add_option("results_dir", results_dir, "directory with results.json")->required();
    figure->add_option("--id", figure_id, "figure id (fig2a ... fig10c)")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, workers, out_dir);
    if (validate->parsed()) return cmd_validate(config_path);
    if (fit->parsed()) return cmd_fit(csv_path, quantity, axis, window);
    if (figure->parsed()) return cmd_figure(results_dir, figure_id);
    return 1;
}
