#include "gravekit/service.hpp"

#include "gravekit/assemble.hpp"
#include "gravekit/error.hpp"
#include "gravekit/orient.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <tuple>

namespace gravekit {

std::string_view to_string(JobState state) noexcept {
    switch (state) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "queued";
}

std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Service::Service(Store& store, PipelineOptions pipeline, std::size_t raster_cache_pages)
    : store_(store), pipeline_(std::move(pipeline)), now_(utc_timestamp), cache_capacity_(std::max<std::size_t>(1, raster_cache_pages)) {}

Service::~Service() { wait_for_jobs(); }

Document Service::require_document(const std::string& id) const {
    auto doc = store_.document(id);
    if (!doc) throw Error(ErrorCode::UnknownDocument, id);
    return *doc;
}

Document Service::ingest(const Manifest& manifest) { return import_document(store_, manifest.meta, manifest.pages); }

std::vector<Detection> Service::add_detections(const std::string& document_id, std::istream& lines,
                                               const ParseOptions& options) {
    require_document(document_id);
    // Pages can also be named relative to the document as "p<index>".
    std::map<std::string, std::pair<std::string, PageSize>, std::less<>> pages;
    for (const Page& p : store_.pages(document_id)) {
        pages[p.id] = {p.id, {p.width_px, p.height_px}};
        pages["p" + std::to_string(p.index)] = {p.id, {p.width_px, p.height_px}};
    }
    auto dets = parse_detections(lines, [&](std::string_view id) -> std::optional<PageSize> {
        const auto it = pages.find(id);
        if (it == pages.end()) return std::nullopt;
        return it->second.second;
    }, options);
    for (Detection& d : dets) d.page_id = pages.at(d.page_id).first;
    store_.put_detections(dets);
    return dets;
}

std::shared_ptr<const GrayImage> Service::page_raster(const std::string& page_id) const {
    {
        std::lock_guard lock(cache_mutex_);
        for (auto it = cache_.begin(); it != cache_.end(); ++it) {
            if (it->first == page_id) {
                cache_.splice(cache_.begin(), cache_, it);
                return cache_.front().second;
            }
        }
    }
    auto raster = std::make_shared<const GrayImage>(get_page_raster(store_, page_id));
    std::lock_guard lock(cache_mutex_);
    cache_.emplace_front(page_id, raster);
    while (cache_.size() > cache_capacity_) cache_.pop_back();
    return raster;
}

AssembleSummary Service::assemble(const std::string& document_id) {
    const Document doc = require_document(document_id);
    AssembleSummary summary;
    for (const Page& page : store_.pages(document_id)) {
        ++summary.pages;
        const auto stored = store_.detections_for_page(page.id);
        const auto usable = filter_by_confidence(stored, pipeline_.confidence_threshold);
        const auto trees = assemble_graves(usable);
        summary.trees += static_cast<int>(trees.size());
        if (trees.empty()) continue;
        const auto raster = page_raster(page.id);
        const PageContext page_ctx{doc, page, *raster, stored};
        const RecordContext ctx{page_ctx, pipeline_, nullptr, now_};
        for (const GraveTree& tree : trees) {
            if (store_.record_for_grave_detection(document_id, tree.grave.id)) continue;
            store_.insert_record(create_record(tree, ctx));
            ++summary.created;
        }
    }
    return summary;
}

std::string Service::start_assemble_job(const std::string& document_id) {
    require_document(document_id);
    std::lock_guard lock(jobs_mutex_);
    for (const auto& [id, status] : jobs_) {
        if (status.document_id == document_id && (status.state == JobState::queued || status.state == JobState::running)) {
            return id;
        }
    }
    const std::string id = "job" + std::to_string(++job_counter_);
    jobs_[id] = JobStatus{id, document_id, JobState::queued, {}, {}};
    threads_.emplace_back([this, id, document_id] {
        {
            std::lock_guard l(jobs_mutex_);
            jobs_[id].state = JobState::running;
        }
        try {
            const AssembleSummary s = assemble(document_id);
            std::lock_guard l(jobs_mutex_);
            jobs_[id].summary = s;
            jobs_[id].state = JobState::done;
        } catch (const std::exception& e) {
            std::lock_guard l(jobs_mutex_);
            jobs_[id].error = e.what();
            jobs_[id].state = JobState::failed;
        }
    });
    return id;
}

std::optional<JobStatus> Service::job(const std::string& job_id) const {
    std::lock_guard lock(jobs_mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

void Service::wait_for_jobs() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(jobs_mutex_);
        threads.swap(threads_);
    }
    for (auto& t : threads) {
        if (t.joinable()) t.join();
    }
}

GraveRecord Service::record(const std::string& record_id) const {
    auto r = store_.record(record_id);
    if (!r) throw Error(ErrorCode::UnknownRecord, record_id);
    return *r;
}

std::vector<GraveRecord> Service::records(const std::string& document_id) const {
    require_document(document_id);
    return store_.records_for_document(document_id);
}

GraveRecord Service::next_in_queue(const std::string& document_id) const {
    const auto all = records(document_id);
    const GraveRecord* best = nullptr;
    auto key = [](const GraveRecord& r) {
        return std::make_tuple(r.page_index, r.tree.grave.bbox.y_min, r.tree.grave.bbox.x_min, r.record_id.size(),
                               r.record_id);
    };
    for (const auto& r : all) {
        if (r.status == ValidationStatus::Validated || r.status == ValidationStatus::Discarded) continue;
        if (best == nullptr || key(r) < key(*best)) best = &r;
    }
    if (best == nullptr) throw Error(ErrorCode::QueueEmpty, "no records left to validate in " + document_id);
    return *best;
}

GraveRecord Service::with_context(const GraveRecord& record,
                                  const std::function<GraveRecord(const RecordContext&)>& fn) const {
    const Document doc = require_document(record.document_id);
    const auto page = store_.page(record.page_id);
    if (!page) throw Error(ErrorCode::UnknownPage, record.page_id);
    const auto raster = page_raster(page->id);
    const auto detections = store_.detections_for_page(page->id);
    const PageContext page_ctx{doc, *page, *raster, detections};
    const std::string record_id = record.record_id;
    const std::string document_id = record.document_id;
    const RecordContext ctx{page_ctx, pipeline_,
                            [this, record_id, document_id](const std::string& gid) {
                                return store_.grave_id_taken(document_id, gid, record_id);
                            },
                            now_};
    return fn(ctx);
}

GraveRecord Service::apply_step(const std::string& record_id, int version, Action action,
                                const nlohmann::json& payload) {
    const GraveRecord current = record(record_id);
    if (current.version != version) {
        throw Error(ErrorCode::StaleVersion, "record " + record_id + " is at version " +
                                                 std::to_string(current.version) + ", not " + std::to_string(version));
    }
    GraveRecord updated =
        with_context(current, [&](const RecordContext& ctx) { return transition(current, action, payload, ctx); });
    store_.update_record(updated, version);
    return updated;
}

GraveRecord Service::recompute(const std::string& record_id) {
    const GraveRecord current = record(record_id);
    GraveRecord updated = with_context(current, [&](const RecordContext& ctx) { return gravekit::recompute(current, ctx); });
    store_.update_record(updated, current.version);
    return updated;
}

CorrectionsSummary Service::apply_corrections(const std::string& document_id, const nlohmann::json& corrections) {
    require_document(document_id);
    if (!corrections.is_object() || !corrections.contains("graves") || !corrections["graves"].is_array()) {
        throw Error(ErrorCode::SchemaError, "corrections need a \"graves\" array");
    }
    CorrectionsSummary summary;
    for (const auto& g : corrections["graves"]) {
        std::string record_id;
        if (g.contains("record_id")) {
            record_id = g["record_id"].get<std::string>();
        } else {
            const std::string det = g.at("detection_id").get<std::string>();
            auto found = store_.record_for_grave_detection(document_id, det);
            if (!found) throw Error(ErrorCode::UnknownRecord, "no record for grave detection " + det);
            record_id = *found;
        }
        for (const auto& step : g.value("steps", nlohmann::json::array())) {
            const auto action = parse_action(step.at("action").get<std::string>());
            if (!action) throw Error(ErrorCode::ValidationPayloadError, "unknown action " + step["action"].dump());
            const int version = record(record_id).version;
            try {
                apply_step(record_id, version, *action, step.value("payload", nlohmann::json::object()));
            } catch (const Error& e) {
                throw Error(e.code(), "record " + record_id + ": " + e.what());
            }
            ++summary.steps;
        }
        ++summary.records;
        const auto status = record(record_id).status;
        if (status == ValidationStatus::Validated) ++summary.validated;
        if (status == ValidationStatus::Discarded) ++summary.discarded;
    }
    return summary;
}

std::string Service::export_document(const std::string& document_id, ExportFormat format, bool include_all) const {
    return export_records(records(document_id), format, include_all);
}

std::vector<int> Service::rose(const std::string& document_id, int sector_deg) const {
    std::vector<double> bearings;
    for (const auto& r : records(document_id)) {
        if (r.status != ValidationStatus::Validated) continue;
        for (const auto& s : r.skeletons) {
            if (s.bearing_deg) bearings.push_back(*s.bearing_deg);
        }
    }
    return rose_histogram(bearings, sector_deg);
}

OutlineSet Service::outlines(const std::string& document_id, int harmonics) const {
    OutlineSet out;
    for (const auto& r : records(document_id)) {
        if (r.status != ValidationStatus::Validated || !r.outline || r.manual_box) continue;
        out.record_ids.push_back(r.record_id);
        out.coefficients.push_back(efd(*r.outline, harmonics));
    }
    return out;
}

PcaSet Service::pca(const std::string& document_id, int k, int harmonics) const {
    const OutlineSet set = outlines(document_id, harmonics);
    std::vector<std::vector<double>> rows;
    rows.reserve(set.coefficients.size());
    for (const auto& c : set.coefficients) rows.push_back(flatten(c));
    return PcaSet{set.record_ids, pca_project(rows, k)};
}

}  // namespace gravekit
