// Frame-directory sequences and OTB-style ground-truth / trajectory files.
//
// Conventions: files in a sequence directory are sorted lexicographically by
// name to define temporal order. Ground-truth files carry one "x,y,w,h" line
// per frame in 1-based pixel coordinates (OTB convention); coordinates are
// converted to 0-based on load and back on save. An all-zero row marks a
// frame with no annotation. Trajectory CSVs are our own format and use
// 0-based coordinates.
#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ebt/image.hpp"

namespace ebt {

inline bool gt_present(const BoundingBox& b) { return b.w > 0.0 && b.h > 0.0; }

inline std::vector<Image> load_sequence(const std::string& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory))
        throw std::runtime_error("sequence directory not found: " + directory);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (ext == ".ppm" || ext == ".pgm" || ext == ".bmp")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no frames found in " + directory);

    std::vector<Image> frames;
    frames.reserve(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
        Image img = load_image(files[i]);
        if (!frames.empty() &&
            (img.width != frames[0].width || img.height != frames[0].height))
            throw std::runtime_error("frame " + std::to_string(i) + " (" + files[i] +
                                     ") has different dimensions than frame 0");
        frames.push_back(std::move(img));
    }
    return frames;
}

inline std::vector<BoundingBox> load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ground-truth file: " + path);
    std::vector<BoundingBox> boxes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        for (auto& c : line)
            if (c == ',' || c == '\t') c = ' ';
        std::istringstream ls(line);
        double x, y, w, h;
        if (!(ls >> x >> y >> w >> h))
            throw std::runtime_error("bad ground-truth line " +
                                     std::to_string(boxes.size() + 1) + " in " + path);
        if (w <= 0.0 || h <= 0.0) {
            boxes.emplace_back(0.0, 0.0, 0.0, 0.0);  // absent
        } else {
            boxes.emplace_back(x - 1.0, y - 1.0, w, h);
        }
    }
    if (boxes.empty()) throw std::runtime_error("empty ground-truth file: " + path);
    return boxes;
}

inline void save_ground_truth(const std::vector<BoundingBox>& boxes, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write ground-truth file: " + path);
    char buf[128];
    for (const auto& b : boxes) {
        if (!gt_present(b)) {
            out << "0,0,0,0\n";
        } else {
            std::snprintf(buf, sizeof(buf), "%g,%g,%g,%g\n", b.x + 1.0, b.y + 1.0, b.w, b.h);
            out << buf;
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct TrajectoryEntry {
    BoundingBox box;
    double score = 0.0;
};

// CSV format: header then one "frame,x,y,w,h,score" line per frame, frames 1-based.
inline void save_trajectory(const std::vector<TrajectoryEntry>& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory: " + path);
    out << "frame,x,y,w,h,score\n";
    char buf[192];
    for (std::size_t i = 0; i < traj.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.4f,%.4f,%.4f,%.4f,%.9g\n", i + 1,
                      traj[i].box.x, traj[i].box.y, traj[i].box.w, traj[i].box.h,
                      traj[i].score);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<TrajectoryEntry> load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory: " + path);
    std::vector<TrajectoryEntry> traj;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("frame,", 0) == 0) continue;
        }
        for (auto& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        long frame;
        TrajectoryEntry e;
        if (!(ls >> frame >> e.box.x >> e.box.y >> e.box.w >> e.box.h >> e.score))
            throw std::runtime_error("bad trajectory line in " + path);
        traj.push_back(e);
    }
    if (traj.empty()) throw std::runtime_error("empty trajectory file: " + path);
    return traj;
}

}  // namespace ebt
