"""attnet: temporal retweet-network analytics.

Reconstructs weighted directed retweet graphs from archived event streams,
detects stable communities via consensus modularity maximization, groups
them into characterized super-communities, and quantifies attention
dynamics over time.
"""

__version__ = "0.1.0"
