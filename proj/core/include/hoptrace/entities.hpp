#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hoptrace {

/// A normalized entity mention: casefolded tokens with punctuation and
/// articles removed, e.g. "Partick Thistle F.C." -> {"partick","thistle","fc"}.
using Entity = std::vector<std::string>;

std::string entity_text(const Entity& e);

/// Rule-based extractor: maximal runs of capitalized words (connectors such
/// as "of"/"de" allowed inside a run), tokens containing digits, and quoted
/// spans. Sentence-initial question and function words are not entities.
std::vector<Entity> extract_entities(std::string_view text);

/// Two mentions refer to the same entity when one token sequence occurs
/// contiguously inside the other.
bool same_entity(const Entity& a, const Entity& b);

bool entities_intersect(const std::vector<Entity>& a, const std::vector<Entity>& b);

}  // namespace hoptrace
