#pragma once

#include <optional>
#include <string>

#include "martrep/enlargement.hpp"
#include "martrep/mixed.hpp"
#include "martrep/space.hpp"

namespace martrep {

// A loaded finite-model document: the validated space plus the optional role
// declarations needed by the analysis pipeline.
struct SpaceDocument {
  FiniteSpace<double> space;
  std::optional<std::string> f_time;   // generator of F
  std::optional<std::string> h_time;   // generator of H
  std::optional<std::string> measure;  // reference measure

  bool has_roles() const { return f_time && h_time && measure; }
  JointModel<double> joint_model() const;
};

// Parses and validates a finite-model JSON document. Every invariant
// violation raises ValidationError carrying the path of the offending field.
SpaceDocument load_model_text(const std::string& text);
SpaceDocument load_model_file(const std::string& path);

// Mixed-model documents for the simulation pipeline.
MixedModel load_mixed_text(const std::string& text);
MixedModel load_mixed_file(const std::string& path);

// Distinguishes the two document kinds by their "schema" field.
enum class DocumentKind { kFiniteModel, kMixedModel };
DocumentKind sniff_document_kind(const std::string& text);
DocumentKind sniff_document_file(const std::string& path);

}  // namespace martrep
