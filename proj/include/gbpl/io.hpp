#pragma once

#include "gbpl/hlg.hpp"
#include "gbpl/pipeline.hpp"
#include "gbpl/sweep.hpp"

#include <string>
#include <vector>

namespace gbpl {

// CSV writers for the run outputs. Each schema is fixed by its header row:
//   trajectory: t,x,y,gamma,s,localized
//   fixes:      t,k,vertex,x,y,heading,chain   (chain = vertex ids joined by |)
//   alignments: k,t,accepted,cost,dof,threshold,angle,tx,ty,s_ssf,ssf_var
//   truth:      t,x,y,gamma,speed
std::string trajectory_to_csv(const std::vector<PoseRecord>& recs);
std::string fixes_to_csv(const std::vector<FixRecord>& fixes);
std::string alignments_to_csv(const std::vector<AlignmentEvent>& events);
std::string truth_to_csv(const std::vector<TrajectoryPoint>& truth);

// Figures, rendered into a fixed 1000x700 viewport. Pure serialization of the
// data passed in: emitting or skipping them cannot change any CSV byte.
// track_svg draws the map gray, the raw dead-reckoning track black and the
// aligned track red; sweep_heatmap_svg draws one (entropy x n) cell grid of
// mean solution counts for the given match mode.
std::string track_svg(const Hlg& g, const std::vector<PoseRecord>& raw,
                      const std::vector<PoseRecord>& aligned);
std::string sweep_heatmap_svg(const SweepResult& res, MatchMode mode);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace gbpl
