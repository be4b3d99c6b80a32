// Command line front end. Every subcommand works on one SQLite file (--db).

#include "gravekit/adapters.hpp"
#include "gravekit/error.hpp"
#include "gravekit/geometry.hpp"
#include "gravekit/server.hpp"
#include "gravekit/service.hpp"
#include "gravekit/synthkit.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace gravekit;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, path + ": " + e.what());
    }
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path);
}

struct PipelineFlags {
    std::string ocr_labels;
    std::string ocr_command;
    std::string classifier_command;
    std::string north = "geometric";
    double confidence = 0.8;

    PipelineOptions build() const {
        PipelineOptions o;
        o.confidence_threshold = confidence;
        if (!ocr_labels.empty()) {
            std::map<std::string, std::string> labels;
            const auto j = read_json(ocr_labels);
            for (const auto& [key, text] : j.items()) labels[key] = text.get<std::string>();
            o.ocr = lookup_ocr(std::move(labels));
        } else if (!ocr_command.empty()) {
            o.ocr = command_ocr(ocr_command);
        }
        o.north_strategy = north == "classifier" ? NorthStrategy::Classifier : NorthStrategy::Geometric;
        if (!classifier_command.empty()) o.arrow_classifier = command_classifier(classifier_command);
        return o;
    }
};

Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grave catalogue digitisation toolkit"};
    app.require_subcommand(1);
    std::string db = "gravekit.db";
    PipelineFlags flags;
    app.add_option("--db", db, "SQLite database file")->capture_default_str();
    app.add_option("--ocr-labels", flags.ocr_labels, "JSON map of scale detection id to label text");
    app.add_option("--ocr", flags.ocr_command, "OCR program, called as <cmd> crop.png");
    app.add_option("--north", flags.north, "north arrow strategy")
        ->check(CLI::IsMember({"geometric", "classifier"}))
        ->capture_default_str();
    app.add_option("--classifier", flags.classifier_command, "arrow classifier program, prints a bin 0..35");
    app.add_option("--confidence", flags.confidence, "detection confidence threshold")->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "store a document from a manifest");
    std::string manifest_path;
    ingest->add_option("manifest", manifest_path)->required()->check(CLI::ExistingFile);

    // detections
    auto* dets = app.add_subcommand("detections", "add detections to a document");
    std::string doc_id, dets_path, detector;
    bool alternative = false;
    dets->add_option("document", doc_id)->required();
    dets->add_option("file", dets_path, "detection JSON lines ('-' for stdin)");
    dets->add_option("--detector", detector, "run <cmd> page.png on every page instead");
    dets->add_flag("--alternative-names", alternative, "accept the alternative label names");

    // assemble
    auto* assemble = app.add_subcommand("assemble", "group detections into graves and measure them");
    assemble->add_option("document", doc_id)->required();

    // validate-batch
    auto* batch = app.add_subcommand("validate-batch", "replay a corrections file");
    std::string corrections_path;
    batch->add_option("document", doc_id)->required();
    batch->add_option("corrections", corrections_path)->required()->check(CLI::ExistingFile);

    // records / show / step / recompute
    auto* list = app.add_subcommand("records", "list the records of a document");
    list->add_option("document", doc_id)->required();
    auto* show = app.add_subcommand("show", "print one record as JSON");
    std::string record_id;
    show->add_option("record", record_id)->required();
    auto* step = app.add_subcommand("step", "apply one wizard action");
    std::string action_text = "advance", payload_text = "{}";
    int version = 0;
    step->add_option("record", record_id)->required();
    step->add_option("--version", version, "expected record version (default: current)");
    step->add_option("--action", action_text)->check(CLI::IsMember({"advance", "back", "discard"}))->capture_default_str();
    step->add_option("--payload", payload_text, "JSON payload")->capture_default_str();
    auto* recompute = app.add_subcommand("recompute", "re-run the pipeline for one record");
    recompute->add_option("record", record_id)->required();

    // export
    auto* exp = app.add_subcommand("export", "export validated records");
    std::string format = "csv", out_path;
    bool include_all = false;
    exp->add_option("document", doc_id)->required();
    exp->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    exp->add_option("-o,--output", out_path);
    exp->add_flag("--all", include_all, "include records that are not validated");

    // stats
    auto* stats = app.add_subcommand("stats", "rose diagram counts, outline coefficients or PCA");
    std::string kind;
    int sector = 10, k = 2, harmonics = kDefaultHarmonics;
    stats->add_option("kind", kind)->required()->check(CLI::IsMember({"rose", "outlines", "pca"}));
    stats->add_option("document", doc_id)->required();
    stats->add_option("--sector", sector)->capture_default_str();
    stats->add_option("-k", k)->capture_default_str();
    stats->add_option("--harmonics", harmonics)->capture_default_str();
    stats->add_option("-o,--output", out_path);

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP API");
    std::string host = "127.0.0.1", token;
    int port = 8080;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--token", token, "shared token required on every request");

    // synth
    auto* synth = app.add_subcommand("synth", "write synthetic pages with ground truth");
    std::uint64_t seed = 1;
    int pages = 10;
    std::string out_dir;
    SynthParams params;
    synth->add_option("--seed", seed)->capture_default_str();
    synth->add_option("--pages", pages)->capture_default_str();
    synth->add_option("--out", out_dir)->required();
    synth->add_option("--speckle", params.speckle_density)->capture_default_str();
    synth->add_option("--stroke-breaks", params.stroke_break_probability)->capture_default_str();
    synth->add_option("--drop", params.drop_probability)->capture_default_str();
    synth->add_option("--perturb", params.bbox_perturbation)->capture_default_str();
    synth->add_option("--arrow-probability", params.arrow_probability)->capture_default_str();

    // score
    auto* score = app.add_subcommand("score", "compare an export with synthetic ground truth");
    std::string export_path, truth_path;
    ScoreTolerances tol;
    score->add_option("export", export_path)->required()->check(CLI::ExistingFile);
    score->add_option("truth", truth_path)->required()->check(CLI::ExistingFile);
    score->add_option("--size-pct", tol.size_pct)->capture_default_str();
    score->add_option("--bearing-deg", tol.bearing_deg)->capture_default_str();

    // contours
    auto* contours = app.add_subcommand("contours", "trace outer contours of a PNG");
    std::string png_path;
    contours->add_option("png", png_path)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto files = write_corpus(out_dir, seed, pages, params);
            fmt::print("{}\n{}\n{}\n", files.manifest, files.detections, files.truth);
            return 0;
        }
        if (*score) {
            const std::string text = read_text(export_path);
            const bool json = !text.empty() && (text.front() == '[' || text.front() == '{');
            const auto rows = json ? export_rows_from_json(text) : parse_export_csv(text);
            const auto report = score_against_truth(rows, truth_from_json(read_json(truth_path)), tol);
            std::cout << report_json(report).dump(2) << "\n";
            return report.pass ? 0 : 1;
        }
        if (*contours) {
            const GrayImage gray = decode_png_gray(read_file_bytes(png_path));
            nlohmann::json out = nlohmann::json::array();
            for (const auto& c : trace_outer_contours(binarize(gray))) {
                nlohmann::json pts = nlohmann::json::array();
                for (const auto& p : c.points) pts.push_back({p.x, p.y});
                out.push_back(pts);
            }
            std::cout << out.dump() << "\n";
            return 0;
        }

        Store store(db);
        Service service(store, flags.build());

        if (*ingest) {
            const auto base = std::filesystem::path(manifest_path).parent_path().string();
            const Document doc = service.ingest(read_manifest(read_json(manifest_path), base));
            fmt::print("{}\n", doc.id);
        } else if (*dets) {
            ParseOptions opts;
            if (alternative) opts.aliases = LabelAliases::with_alternative_names();
            std::size_t stored = 0;
            if (!detector.empty()) {
                for (const Page& p : store.pages(doc_id)) {
                    const auto found = run_detector(detector, *service.page_raster(p.id), p.id, opts);
                    store.put_detections(found);
                    stored += found.size();
                }
            } else if (dets_path.empty() || dets_path == "-") {
                stored = service.add_detections(doc_id, std::cin, opts).size();
            } else {
                std::ifstream in(dets_path);
                if (!in) throw std::runtime_error("cannot read " + dets_path);
                stored = service.add_detections(doc_id, in, opts).size();
            }
            fmt::print("{} detections stored\n", stored);
        } else if (*assemble) {
            const auto s = service.assemble(doc_id);
            fmt::print("{} pages, {} graves, {} new records\n", s.pages, s.trees, s.created);
        } else if (*batch) {
            const auto s = service.apply_corrections(doc_id, read_json(corrections_path));
            fmt::print("{} records, {} steps, {} validated, {} discarded\n", s.records, s.steps, s.validated,
                       s.discarded);
        } else if (*list) {
            for (const auto& r : service.records(doc_id)) {
                fmt::print("{}\t{}\t{}\t{}\tv{}\n", r.record_id, r.page_index, r.tree.grave.id,
                           to_string(r.status), r.version);
            }
        } else if (*show) {
            std::cout << to_json(service.record(record_id)).dump(2) << "\n";
        } else if (*step) {
            const auto action = parse_action(action_text);
            const int v = step->count("--version") ? version : service.record(record_id).version;
            const auto updated = service.apply_step(record_id, v, *action, nlohmann::json::parse(payload_text));
            fmt::print("{} -> {} (v{})\n", updated.record_id, to_string(updated.status), updated.version);
        } else if (*recompute) {
            const auto updated = service.recompute(record_id);
            fmt::print("{} recomputed\n", updated.record_id);
        } else if (*exp) {
            write_output(out_path, service.export_document(doc_id, format == "csv" ? ExportFormat::csv : ExportFormat::json,
                                                           include_all));
        } else if (*stats) {
            if (kind == "rose") {
                const auto counts = service.rose(doc_id, sector);
                std::string text = "sector_start_deg,count\n";
                for (std::size_t i = 0; i < counts.size(); ++i) text += fmt::format("{},{}\n", i * sector, counts[i]);
                write_output(out_path, text);
            } else if (kind == "outlines") {
                const auto set = service.outlines(doc_id, harmonics);
                write_output(out_path, coefficients_csv(set.record_ids, set.coefficients));
            } else {
                const auto set = service.pca(doc_id, k, harmonics);
                write_output(out_path, projection_csv(set.record_ids, set.result));
            }
        } else if (*serve) {
            Server server(service, ServerOptions{token, {}});
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            fmt::print("listening on http://{}:{}\n", host, bound);
            std::fflush(stdout);
            server.run();
            g_server = nullptr;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
