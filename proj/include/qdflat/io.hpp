#pragma once

#include <iosfwd>
#include <string>

#include "qdflat/nrrp.hpp"
#include "qdflat/periods.hpp"
#include "qdflat/surfaces.hpp"

namespace qdf::io {

// Line-oriented text formats (docs/formats). '#' starts a comment; blank lines are ignored.
// Parse errors are qdf::Error with "<source>:<line>: " in front.

// scale re im
// re im order marked
// [infinity marked]
RationalQD parse_differential(std::istream& in, const std::string& source = "<input>");
RationalQD read_differential(const std::string& path);
std::string format_differential(const RationalQD& q);

// scale re im / center re im / compare f
// re im order marked cluster
ClusterFamily parse_family(std::istream& in, const std::string& source = "<input>");
ClusterFamily read_family(const std::string& path);

// one vertex per line: re im
std::vector<cplx> parse_contour(std::istream& in, const std::string& source = "<input>");
std::vector<cplx> read_contour(const std::string& path);

// polygon / re im ... / end, then  (pA,eA) <-> (pB,eB) sign
PolygonSpec parse_polygons(std::istream& in, const std::string& source = "<input>");
PolygonSpec read_polygons(const std::string& path);

// center re im
// side dir_re dir_im length
// interior re im order marked ratio_re ratio_im
NRRP parse_nrrp(std::istream& in, const std::string& source = "<input>");
NRRP read_nrrp(const std::string& path);
std::string format_nrrp(const NRRP& P);

void write_text(const std::string& path, const std::string& text);

}  // namespace qdf::io
