// synth --seed S --pages N --out dir/

#include "gravekit/error.hpp"
#include "gravekit/synthkit.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Synthetic catalogue pages with ground truth"};
    std::uint64_t seed = 1;
    int pages = 10;
    std::string out;
    gravekit::SynthParams params;
    app.add_option("--seed", seed)->capture_default_str();
    app.add_option("--pages", pages)->capture_default_str();
    app.add_option("--out", out)->required();
    app.add_option("--graves-min", params.graves_min)->capture_default_str();
    app.add_option("--graves-max", params.graves_max)->capture_default_str();
    app.add_option("--jitter", params.jitter_px)->capture_default_str();
    app.add_option("--speckle", params.speckle_density)->capture_default_str();
    app.add_option("--stroke-breaks", params.stroke_break_probability)->capture_default_str();
    app.add_option("--drop", params.drop_probability)->capture_default_str();
    app.add_option("--perturb", params.bbox_perturbation)->capture_default_str();
    app.add_option("--arrow-probability", params.arrow_probability)->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    try {
        const auto files = gravekit::write_corpus(out, seed, pages, params);
        std::cout << files.manifest << "\n";
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}
