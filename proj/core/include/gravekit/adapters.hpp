#pragma once

#include "gravekit/detect.hpp"
#include "gravekit/image.hpp"
#include "gravekit/orient.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

// External programs that stand in for the trained models. Each is called as
// `<command> <file.png>` and answers on standard output.

namespace gravekit {

using OcrFunction = std::function<std::optional<std::string>(const GrayImage& crop, const Detection& scale)>;

/// Runs `command page.png` and parses its JSON-lines output. Records without
/// a page_id are attributed to `page_id`. Throws DetectorFailure on a
/// nonzero exit status.
std::vector<Detection> run_detector(const std::string& command, const GrayImage& page, const std::string& page_id,
                                    const ParseOptions& options = {});

/// `command crop.png` prints the label text. Failures come back as nullopt.
OcrFunction command_ocr(std::string command);

/// Label text looked up by scale detection id (the synthetic generator
/// writes these next to its pages).
OcrFunction lookup_ocr(std::map<std::string, std::string> labels_by_detection);

/// `command crop.png` prints a bin 0..35. Throws AdapterFailure otherwise.
ArrowClassifier command_classifier(std::string command);

}  // namespace gravekit
