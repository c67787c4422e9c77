export type Axis = "x" | "y" | "z";

export interface VolumeInfo {
  id: string;
  dims: [number, number, number];
  spacing: [number, number, number];
}

export interface SegStats {
  iterations_run: number;
  final_mean_radius: number;
  vertex_count: number;
  triangle_count: number;
  volume_cm3: number;
  wall_time: number;
  termination_reason: string;
}

export type JobStatus = "pending" | "running" | "done" | "failed";

export interface JobBody {
  status: JobStatus;
  stats?: SegStats;
  error?: string;
}

export interface RleRow {
  y: number;
  runs: [number, number][];
}

export const AXIS_INDEX: Record<Axis, number> = { x: 0, y: 1, z: 2 };

/** The two in-plane volume axes for a slice axis, ascending (matches the server). */
export function planeAxes(axis: Axis): [number, number] {
  const a = AXIS_INDEX[axis];
  const rest = [0, 1, 2].filter((i) => i !== a);
  return [rest[0], rest[1]];
}
