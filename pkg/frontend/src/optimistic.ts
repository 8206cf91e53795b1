import type { Tally } from './api';

/** Local prediction for a vote before the server answers. */
export function predictTally(current: Tally, previousVote: 'up' | 'down' | null, vote: 'up' | 'down'): Tally {
  const next = { ...current };
  if (previousVote === vote) {
    return next; // re-casting the same vote changes nothing
  }
  if (previousVote) {
    next[previousVote] -= 1;
  }
  next[vote] += 1;
  return next;
}

/**
 * Optimistic vote: apply the predicted tally immediately, reconcile with the
 * server's answer, roll back to the previous tally if the request fails.
 */
export async function optimisticVote(
  current: Tally,
  vote: 'up' | 'down',
  previousVote: 'up' | 'down' | null,
  apply: (tally: Tally) => void,
  send: () => Promise<Tally>,
): Promise<Tally> {
  apply(predictTally(current, previousVote, vote));
  try {
    const confirmed = await send();
    apply(confirmed); // the server tally is authoritative
    return confirmed;
  } catch (error) {
    apply(current);
    throw error;
  }
}
