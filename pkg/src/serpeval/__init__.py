"""Contextual evaluation harness for web search engines.

Scores engines at three complementary levels: system performance (dead
links, redundancy, parasites, response time), query-context relevance
via incremental word-group weighting, and user-context relevance via
collected 0-5 judgments, then couples the levels into one final score
per engine.
"""

__version__ = "0.1.0"
