#include "gravekit/adapters.hpp"

#include "gravekit/error.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace gravekit {

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

/// PNG written to a private temporary file, removed on destruction.
class TempPng {
public:
    explicit TempPng(const GrayImage& image) {
        std::string tmpl = (std::filesystem::temp_directory_path() / "gravekit-XXXXXX.png").string();
        const int fd = mkstemps(tmpl.data(), 4);
        if (fd < 0) throw Error(ErrorCode::AdapterFailure, "cannot create a temporary file");
        close(fd);
        path_ = tmpl;
        write_file_bytes(path_, encode_png(image));
    }
    ~TempPng() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    TempPng(const TempPng&) = delete;
    TempPng& operator=(const TempPng&) = delete;

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct CommandResult {
    int status = -1;
    std::string out;
};

CommandResult run(const std::string& command, const std::string& arg) {
    const std::string line = command + " " + shell_quote(arg);
    FILE* pipe = popen(line.c_str(), "r");
    if (pipe == nullptr) return {};
    CommandResult result;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.out.append(buf.data(), n);
    const int raw = pclose(pipe);
    result.status = raw >= 0 && WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return result;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<Detection> run_detector(const std::string& command, const GrayImage& page, const std::string& page_id,
                                    const ParseOptions& options) {
    TempPng file(page);
    const CommandResult r = run(command, file.path());
    if (r.status != 0) {
        throw Error(ErrorCode::DetectorFailure, "'" + command + "' exited with status " + std::to_string(r.status));
    }
    ParseOptions opts = options;
    opts.default_page_id = page_id;
    const PageSize size{page.width(), page.height()};
    std::istringstream in(r.out);
    return parse_detections(in, [&](std::string_view id) -> std::optional<PageSize> {
        if (id == page_id) return size;
        return std::nullopt;
    }, opts);
}

OcrFunction command_ocr(std::string command) {
    return [command = std::move(command)](const GrayImage& crop, const Detection&) -> std::optional<std::string> {
        try {
            TempPng file(crop);
            const CommandResult r = run(command, file.path());
            if (r.status != 0) return std::nullopt;
            std::string text = trim(r.out);
            if (text.empty()) return std::nullopt;
            return text;
        } catch (const Error&) {
            return std::nullopt;
        }
    };
}

OcrFunction lookup_ocr(std::map<std::string, std::string> labels_by_detection) {
    return [labels = std::move(labels_by_detection)](const GrayImage&,
                                                     const Detection& scale) -> std::optional<std::string> {
        const auto it = labels.find(scale.id);
        if (it == labels.end()) return std::nullopt;
        return it->second;
    };
}

ArrowClassifier command_classifier(std::string command) {
    return [command = std::move(command)](const GrayImage& crop) -> int {
        TempPng file(crop);
        const CommandResult r = run(command, file.path());
        if (r.status != 0) throw Error(ErrorCode::AdapterFailure, "arrow classifier exited with status " + std::to_string(r.status));
        const std::string text = trim(r.out);
        char* end = nullptr;
        const long bin = std::strtol(text.c_str(), &end, 10);
        if (text.empty() || end != text.c_str() + text.size() || bin < 0 || bin > 35) {
            throw Error(ErrorCode::AdapterFailure, "arrow classifier printed '" + text + "'");
        }
        return static_cast<int>(bin);
    };
}

}  // namespace gravekit
