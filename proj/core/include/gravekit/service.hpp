#pragma once

#include "gravekit/detect.hpp"
#include "gravekit/ingest.hpp"
#include "gravekit/morpho.hpp"
#include "gravekit/records.hpp"
#include "gravekit/store.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

// Application layer shared by the command line tool and the HTTP server.

namespace gravekit {

struct AssembleSummary {
    int pages = 0;
    int trees = 0;
    int created = 0;  // graves that already had a record are skipped
};

struct OutlineSet {
    std::vector<std::string> record_ids;
    std::vector<EFDCoefficients> coefficients;
};

struct PcaSet {
    std::vector<std::string> record_ids;
    PCAResult result;
};

struct CorrectionsSummary {
    int records = 0;
    int steps = 0;
    int validated = 0;
    int discarded = 0;
};

enum class JobState { queued, running, done, failed };

std::string_view to_string(JobState state) noexcept;

struct JobStatus {
    std::string id;
    std::string document_id;
    JobState state = JobState::queued;
    std::string error;
    AssembleSummary summary;
};

class Service {
public:
    Service(Store& store, PipelineOptions pipeline, std::size_t raster_cache_pages = 8);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Store& store() noexcept { return store_; }
    const PipelineOptions& pipeline() const noexcept { return pipeline_; }

    Document ingest(const Manifest& manifest);

    /// Detection JSON lines for pages of this document. Returns what was stored.
    std::vector<Detection> add_detections(const std::string& document_id, std::istream& lines,
                                          const ParseOptions& options = {});

    /// Trees for every page, one record per grave detection not yet recorded.
    AssembleSummary assemble(const std::string& document_id);

    /// Background assembly, single-flight per document: while a job for the
    /// document is queued or running its id is returned again.
    std::string start_assemble_job(const std::string& document_id);
    std::optional<JobStatus> job(const std::string& job_id) const;
    void wait_for_jobs();

    GraveRecord record(const std::string& record_id) const;
    std::vector<GraveRecord> records(const std::string& document_id) const;

    /// Lowest page, then top-most, left-most grave still waiting for
    /// validation. Throws QueueEmpty.
    GraveRecord next_in_queue(const std::string& document_id) const;

    /// Throws StaleVersion when `version` is not the stored one.
    GraveRecord apply_step(const std::string& record_id, int version, Action action, const nlohmann::json& payload);
    GraveRecord recompute(const std::string& record_id);

    /// Replays a corrections file against the document's records:
    ///   {"graves": [{"detection_id" | "record_id": ..., "steps": [{"action", "payload"}]}]}
    /// Each step runs at the record's current version. The first failure
    /// stops the run and is rethrown with the grave named.
    CorrectionsSummary apply_corrections(const std::string& document_id, const nlohmann::json& corrections);

    std::string export_document(const std::string& document_id, ExportFormat format, bool include_all = false) const;

    /// Skeleton bearings of validated records.
    std::vector<int> rose(const std::string& document_id, int sector_deg) const;
    /// EFD coefficients of validated records with an automatic outline.
    OutlineSet outlines(const std::string& document_id, int harmonics = kDefaultHarmonics) const;
    PcaSet pca(const std::string& document_id, int k = 2, int harmonics = kDefaultHarmonics) const;

    std::shared_ptr<const GrayImage> page_raster(const std::string& page_id) const;

    /// Clock for edit-log timestamps; ISO 8601 UTC by default.
    void set_clock(std::function<std::string()> now) { now_ = std::move(now); }

private:
    Document require_document(const std::string& id) const;
    GraveRecord with_context(const GraveRecord& record,
                             const std::function<GraveRecord(const RecordContext&)>& fn) const;

    Store& store_;
    PipelineOptions pipeline_;
    std::function<std::string()> now_;

    std::size_t cache_capacity_;
    mutable std::mutex cache_mutex_;
    mutable std::list<std::pair<std::string, std::shared_ptr<const GrayImage>>> cache_;

    mutable std::mutex jobs_mutex_;
    std::map<std::string, JobStatus> jobs_;
    std::vector<std::thread> threads_;
    int job_counter_ = 0;
};

/// Current UTC time as 2024-01-31T12:00:00Z.
std::string utc_timestamp();

}  // namespace gravekit
