#pragma once

#include "gravekit/detect.hpp"
#include "gravekit/ingest.hpp"
#include "gravekit/records.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

struct sqlite3;

namespace gravekit {

/// Single-file SQLite store for documents, page images, detections and grave
/// records. Page images are written once and never updated. The edit log is
/// append-only. All methods are safe to call from several threads.
class Store {
public:
    /// ":memory:" gives a private in-memory database.
    explicit Store(const std::string& path = ":memory:");
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    Document insert_document(const DocumentMeta& meta, const std::vector<Page>& pages,
                             const std::vector<std::vector<std::uint8_t>>& images);
    std::optional<Document> document(const std::string& id) const;
    std::vector<Document> documents() const;
    std::vector<Page> pages(const std::string& document_id) const;
    std::optional<Page> page(const std::string& page_id) const;
    std::vector<std::uint8_t> page_image(const std::string& page_id) const;

    /// Upserts by (page id, detection id).
    void put_detections(const std::vector<Detection>& detections);
    std::vector<Detection> detections_for_page(const std::string& page_id) const;

    /// Assigns record_id and persists; throws DuplicateGraveId when a live
    /// record of the document already carries the same grave id.
    GraveRecord insert_record(GraveRecord record);
    std::optional<GraveRecord> record(const std::string& record_id) const;
    std::vector<GraveRecord> records_for_document(const std::string& document_id) const;
    std::optional<std::string> record_for_grave_detection(const std::string& document_id,
                                                          const std::string& detection_id) const;
    bool grave_id_taken(const std::string& document_id, const std::string& grave_id,
                        const std::string& except_record_id) const;

    /// Compare-and-swap on the version: succeeds only when the stored
    /// version equals `expected_version`; log entries beyond the stored ones
    /// are appended. Throws StaleVersion, DuplicateGraveId or UnknownRecord
    /// and leaves the row untouched on failure.
    void update_record(const GraveRecord& updated, int expected_version);

private:
    void exec(const char* sql) const;
    GraveRecord load_record(std::int64_t rowid) const;

    sqlite3* db_ = nullptr;
    mutable std::recursive_mutex mutex_;
};

}  // namespace gravekit
